#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "granule/rdgbg.hpp"
#include "granule/harness.hpp"
#include "oracles.hpp"

using namespace granule;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Dataset sized_classes(const std::vector<std::size_t>& sizes) {
    std::vector<double> xs;
    std::vector<ClassId> ls;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        for (std::size_t i = 0; i < sizes[c]; ++i) {
            xs.push_back(static_cast<double>(xs.size()));
            ls.push_back(static_cast<ClassId>(c));
        }
    }
    return oracle::make_1d(xs, ls);
}

std::vector<Neighbor> neighbors_1d(double center, const std::vector<double>& xs, const std::vector<ClassId>& ls) {
    std::vector<Neighbor> out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out.push_back({std::abs(xs[i] - center), i + 1, ls[i]});
    }
    return out;
}

GranularBall ball_at(std::vector<double> center, double radius) {
    GranularBall b;
    b.center = std::move(center);
    b.radius = radius;
    return b;
}

} // namespace

TEST(GroupPotentialCenters, LargestFirst) {
    // class ids deliberately not in size order
    const auto d = sized_classes({10, 42, 20, 26});
    const UndividedSet u(d);
    const auto g = group_potential_centers(u, d);
    ASSERT_EQ(g.size(), 4u);
    EXPECT_EQ(g[0].ids.size(), 42u);
    EXPECT_EQ(g[1].ids.size(), 26u);
    EXPECT_EQ(g[2].ids.size(), 20u);
    EXPECT_EQ(g[3].ids.size(), 10u);
    EXPECT_EQ(g[0].label, 1);
    EXPECT_EQ(g[3].label, 0);
}

TEST(GroupPotentialCenters, EqualSizesOrderedByClassId) {
    const auto d = oracle::make_1d({0, 1, 2, 3, 4, 5}, {1, 1, 1, 0, 0, 0});
    const UndividedSet u(d);
    const auto g = group_potential_centers(u, d);
    ASSERT_EQ(g.size(), 2u);
    EXPECT_EQ(g[0].label, 0);
    EXPECT_EQ(g[1].label, 1);
}

TEST(GroupPotentialCenters, EmptyWhenAllUndividedAreLowDensity) {
    const auto d = oracle::make_1d({0, 1, 2}, {0, 1, 0});
    const std::vector<SampleId> ids{0, 2};
    const UndividedSet u(d, ids, ids);
    EXPECT_TRUE(group_potential_centers(u, d).empty());
    EXPECT_TRUE(u.only_low_density());
}

TEST(GroupPotentialCenters, LowDensityExcluded) {
    const auto d = oracle::make_1d({0, 1, 2, 3}, {0, 0, 1, 1});
    const std::vector<SampleId> all{0, 1, 2, 3}, low{1};
    const UndividedSet u(d, all, low);
    const auto g = group_potential_centers(u, d);
    ASSERT_EQ(g.size(), 2u);
    EXPECT_EQ(g[0].label, 1);
    EXPECT_EQ(g[1].ids, std::vector<SampleId>{0});
}

TEST(DrawCandidateCenters, OnePerGroupInGroupOrder) {
    const auto d = sized_classes({10, 42, 20, 26});
    const UndividedSet u(d);
    const auto groups = group_potential_centers(u, d);
    RngStream rng(3);
    const auto c = draw_candidate_centers(groups, rng);
    ASSERT_EQ(c.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(c[i].label, groups[i].label);
        EXPECT_EQ(d.label(c[i].id), c[i].label);
    }
}

TEST(DrawCandidateCenters, SingletonGroupForcesChoice) {
    const std::vector<ClassGroup> groups{{2, {17}}};
    RngStream rng(1);
    const auto c = draw_candidate_centers(groups, rng);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c[0].id, 17u);
    EXPECT_EQ(c[0].label, 2);
}

TEST(DrawCandidateCenters, FixedSeedReproduces) {
    const auto d = sized_classes({5, 9, 7});
    const UndividedSet u(d);
    const auto groups = group_potential_centers(u, d);
    RngStream a(77), b(77);
    for (int i = 0; i < 20; ++i) {
        const auto x = draw_candidate_centers(groups, a);
        const auto y = draw_candidate_centers(groups, b);
        ASSERT_EQ(x.size(), y.size());
        for (std::size_t j = 0; j < x.size(); ++j) {
            EXPECT_EQ(x[j].id, y[j].id);
        }
    }
}

TEST(DrawCandidateCenters, IndexedDrawMatchesGroupedDraw) {
    RngStream setup(8);
    const auto d = sized_classes({30, 12, 30, 5, 1});
    UndividedSet u(d);
    for (int step = 0; step < 60; ++step) {
        const SampleId id = setup.uniform_index(d.size());
        if (!u.contains(id)) {
            continue;
        }
        if (setup.uniform_index(2) == 0) {
            u.remove(id);
        } else {
            u.mark_low_density(id);
        }
        if (u.only_low_density()) {
            break;
        }
        RngStream a(step), b(step);
        const auto x = draw_candidate_centers(group_potential_centers(u, d), a);
        const auto y = draw_candidate_centers(u, b);
        ASSERT_EQ(x.size(), y.size());
        for (std::size_t j = 0; j < x.size(); ++j) {
            EXPECT_EQ(x[j].id, y[j].id);
            EXPECT_EQ(x[j].label, y[j].label);
        }
    }
}

TEST(DetectCenter, AllNearestHeterogeneousIsNoise) {
    const auto d = oracle::make_1d({0, 1, 2, 3, 4, 5, 100, 101}, {0, 1, 1, 1, 1, 1, 0, 0});
    const UndividedSet u(d);
    const auto det = detect_center({0, 0}, u, d, 5);
    EXPECT_EQ(det.verdict.kind, VerdictKind::center_is_noise);
    EXPECT_EQ(det.verdict.h, 5);
    EXPECT_FALSE(det.verdict.removed_id);
}

TEST(DetectCenter, SingleHeterogeneousNearestIsRemoved) {
    const auto d = oracle::make_1d({0, 1, 2, 3, 4, 5}, {0, 1, 0, 0, 0, 0});
    const UndividedSet u(d);
    const auto det = detect_center({0, 0}, u, d, 5);
    EXPECT_EQ(det.verdict.kind, VerdictKind::accepted_with_noise_removal);
    EXPECT_EQ(det.verdict.h, 1);
    ASSERT_TRUE(det.verdict.removed_id);
    EXPECT_EQ(*det.verdict.removed_id, 1u);
}

TEST(DetectCenter, MixedNeighborhoodIsLowDensity) {
    const auto d = oracle::make_1d({0, 1, 2, 3, 4, 5}, {0, 1, 1, 0, 0, 0});
    const UndividedSet u(d);
    const auto det = detect_center({0, 0}, u, d, 5);
    EXPECT_EQ(det.verdict.kind, VerdictKind::low_density);
    EXPECT_EQ(det.verdict.h, 2);
}

TEST(DetectCenter, HomogeneousNearestIsAccepted) {
    const auto d = oracle::make_1d({0, 1, 2, 3}, {0, 0, 1, 1});
    const UndividedSet u(d);
    const auto det = detect_center({0, 0}, u, d, 5);
    EXPECT_EQ(det.verdict.kind, VerdictKind::accepted);
    EXPECT_EQ(det.verdict.h, 0);
    EXPECT_EQ(det.neighbors.size(), 3u);
}

TEST(DetectCenter, DistanceTieGoesToSmallerId) {
    // ids 1 (class 1) and 2 (class 0) both at distance 1; id 1 is the nearest
    const auto d = oracle::make_1d({0, -1, 1, 5, 6, 7}, {0, 1, 0, 0, 0, 0});
    const UndividedSet u(d);
    const auto det = detect_center({0, 0}, u, d, 5);
    EXPECT_EQ(det.verdict.kind, VerdictKind::accepted_with_noise_removal);
    EXPECT_EQ(*det.verdict.removed_id, 1u);
}

TEST(DetectCenter, LoneSampleIsAccepted) {
    const auto d = oracle::make_1d({0, 1}, {0, 1});
    const std::vector<SampleId> ids{0};
    const UndividedSet u(d, ids, {});
    const auto det = detect_center({0, 0}, u, d, 5);
    EXPECT_EQ(det.verdict.kind, VerdictKind::accepted);
    EXPECT_TRUE(det.neighbors.empty());
}

TEST(DetectCenter, RhoBelowTwoRejected) {
    const auto d = oracle::make_1d({0, 1}, {0, 1});
    const UndividedSet u(d);
    EXPECT_THROW(detect_center({0, 0}, u, d, 1), usage_error);
}

TEST(ConsistentRadius, StopsBeforeFirstHeterogeneous) {
    const auto n = neighbors_1d(0, {1, 2, 10}, {0, 0, 1});
    EXPECT_EQ(consistent_radius(0, n), 2.0);
}

TEST(ConsistentRadius, NoHeterogeneousGivesFarthest) {
    const auto n = neighbors_1d(0, {1, 7.5, 3}, {0, 0, 0});
    EXPECT_EQ(consistent_radius(0, n), 7.5);
}

TEST(ConsistentRadius, ElevenHomogeneousThenHeterogeneous) {
    std::vector<double> xs;
    std::vector<ClassId> ls;
    for (int i = 1; i <= 11; ++i) {
        xs.push_back(i * 0.5);
        ls.push_back(0);
    }
    xs.push_back(6.0);
    ls.push_back(1);
    xs.push_back(9.0);
    ls.push_back(0);
    EXPECT_EQ(consistent_radius(0, neighbors_1d(0, xs, ls)), 5.5);
}

TEST(ConsistentRadius, AloneGivesZero) {
    EXPECT_EQ(consistent_radius(0, std::vector<Neighbor>{}), 0.0);
}

TEST(ConsistentRadius, TiedHeterogeneousExcludesThatDistance) {
    const auto n = neighbors_1d(0, {1, 2, -2}, {0, 0, 1});
    EXPECT_EQ(consistent_radius(0, n), 1.0);
}

TEST(ConflictRadius, NoBallsIsInfinite) {
    const std::vector<double> c{0, 0};
    EXPECT_EQ(conflict_radius(c, std::vector<GranularBall>{}), kInf);
}

TEST(ConflictRadius, OneBall) {
    const std::vector<double> c{0, 0};
    const std::vector<GranularBall> balls{ball_at({3, 4}, 2)};
    EXPECT_DOUBLE_EQ(conflict_radius(c, balls), 3.0);
}

TEST(ConflictRadius, MinimumOverBalls) {
    const std::vector<double> c{0};
    const std::vector<GranularBall> balls{ball_at({5}, 2), ball_at({-2.5}, 1)};
    EXPECT_DOUBLE_EQ(conflict_radius(c, balls), 1.5);
}

TEST(ConflictRadius, InsideBallIsInvariantViolation) {
    const std::vector<double> c{0};
    const std::vector<GranularBall> balls{ball_at({1}, 2)};
    EXPECT_THROW(conflict_radius(c, balls), invariant_error);
}

TEST(ChooseRadius, UnconstrainedUsesCr) {
    const auto rc = choose_radius(2.0, kInf, neighbors_1d(0, {1, 2, 3}, {0, 0, 1}));
    EXPECT_EQ(rc.chosen, 2.0);
    EXPECT_EQ(rc.rule, RadiusRule::cr_rule);
}

TEST(ChooseRadius, RestrictedUsesFarthestWithinConflict) {
    const auto rc = choose_radius(3.0, 1.5, neighbors_1d(0, {0.5, 1.0, 2.0, 3.0}, {0, 0, 0, 0}));
    EXPECT_EQ(rc.rule, RadiusRule::rmax_rule);
    EXPECT_EQ(rc.chosen, 1.0);
    EXPECT_EQ(rc.r_max, 1.0);
    EXPECT_LE(rc.chosen, rc.r_conf);
}

TEST(ChooseRadius, NothingWithinConflictGivesZero) {
    const auto rc = choose_radius(4.0, 1.0, neighbors_1d(0, {1.5, 4}, {0, 0}));
    EXPECT_EQ(rc.rule, RadiusRule::rmax_rule);
    EXPECT_EQ(rc.chosen, 0.0);
}

TEST(CollectMembers, WithinRadius) {
    // ids are 1-based positions in the neighbor list; the center is id 0
    const auto n = neighbors_1d(0, {1, 2, 10}, {0, 0, 1});
    EXPECT_EQ(collect_members({0, 0}, 2.0, n), (std::vector<SampleId>{0, 1, 2}));
}

TEST(CollectMembers, SmallRadiusGivesCenterOnly) {
    const auto n = neighbors_1d(0, {1, 2}, {0, 0});
    EXPECT_EQ(collect_members({0, 0}, 0.5, n), std::vector<SampleId>{0});
}

TEST(CollectMembers, HeterogeneousMemberIsInvariantViolation) {
    const auto n = neighbors_1d(0, {1, 2}, {0, 1});
    EXPECT_THROW(collect_members({0, 0}, 2.0, n), invariant_error);
}

TEST(RunRdgbg, SingleClassGivesOneBall) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        RngStream g(seed);
        const auto d = gen_blobs(25, 1, 3, 1.0, 1.0, g);
        RngStream rng(seed);
        const auto res = run_rdgbg(d, 5, rng);
        ASSERT_EQ(res.balls.size(), 1u);
        EXPECT_EQ(res.balls[0].kind, BallKind::regular);
        EXPECT_EQ(res.balls[0].member_ids.size(), 25u);
        EXPECT_TRUE(res.noise_ids.empty());
    }
}

TEST(RunRdgbg, TwoClustersInOneDimension) {
    const auto d = oracle::make_1d({0, 1, 2, 10, 11, 12}, {0, 0, 0, 1, 1, 1});
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        RngStream rng(seed);
        const auto res = run_rdgbg(d, 2, rng);
        ASSERT_EQ(res.balls.size(), 2u) << "seed " << seed;
        EXPECT_EQ(res.balls[0].member_ids, (std::vector<SampleId>{0, 1, 2}));
        EXPECT_EQ(res.balls[1].member_ids, (std::vector<SampleId>{3, 4, 5}));
        EXPECT_TRUE(res.noise_ids.empty());
        EXPECT_EQ(oracle::check_granulation(d, res), "");
    }
}

TEST(RunRdgbg, EmptyOrBadRhoRejected) {
    const auto d = oracle::make_1d({0, 1}, {0, 1});
    RngStream rng(0);
    EXPECT_THROW(run_rdgbg(d, 1, rng), usage_error);
}

TEST(RunRdgbg, LoneSampleBecomesOrphan) {
    const auto d = oracle::make_1d({0}, {0});
    RngStream rng(0);
    const auto res = run_rdgbg(d, 5, rng);
    ASSERT_EQ(res.balls.size(), 1u);
    EXPECT_NE(res.balls[0].kind, BallKind::regular);
    EXPECT_EQ(res.balls[0].radius, 0.0);
}

TEST(RunRdgbg, ConflictingDuplicatesStayPure) {
    const auto d = oracle::make_1d({0, 0, 0, 0, 5, 5}, {0, 1, 0, 1, 0, 1});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        RngStream rng(seed);
        const auto res = run_rdgbg(d, RdgbgOptions{.rho = 2, .audit = true}, rng);
        EXPECT_EQ(oracle::check_granulation(d, res), "");
    }
}

TEST(RunRdgbg, WellSeparatedBlobsHaveNoNoise) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        RngStream g(seed);
        const auto d = gen_blobs(60, 3, 4, 50.0, 1.0, g);
        RngStream rng(seed);
        const auto res = run_rdgbg(d, 5, rng);
        EXPECT_TRUE(res.noise_ids.empty());
        EXPECT_EQ(oracle::check_granulation(d, res), "");
    }
}

TEST(RunRdgbg, InvariantsHoldOnRandomData) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto c = oracle::random_case(seed, 400);
        for (int rho : {2, 5, 9}) {
            RngStream rng(seed * 31 + static_cast<std::uint64_t>(rho));
            const auto res = run_rdgbg(c.data, RdgbgOptions{.rho = rho, .audit = true}, rng);
            ASSERT_EQ(oracle::check_granulation(c.data, res), "") << c.description << " rho=" << rho;
            for (SampleId id : res.low_density_ids) {
                const bool noise = std::binary_search(res.noise_ids.begin(), res.noise_ids.end(), id);
                const bool orphan_or_member = std::any_of(res.balls.begin(), res.balls.end(), [id](const auto& b) {
                    return std::binary_search(b.member_ids.begin(), b.member_ids.end(), id);
                });
                EXPECT_TRUE(noise || orphan_or_member);
            }
        }
    }
}

TEST(RunRdgbg, SameSeedSameResult) {
    const auto c = oracle::random_case(5, 600);
    RngStream a(9), b(9);
    const auto x = run_rdgbg(c.data, 5, a);
    const auto y = run_rdgbg(c.data, 5, b);
    ASSERT_EQ(x.balls.size(), y.balls.size());
    for (std::size_t i = 0; i < x.balls.size(); ++i) {
        EXPECT_EQ(x.balls[i].member_ids, y.balls[i].member_ids);
        EXPECT_EQ(x.balls[i].radius, y.balls[i].radius);
    }
    EXPECT_EQ(x.noise_ids, y.noise_ids);
    EXPECT_EQ(x.iterations, y.iterations);
}

namespace {

void expect_same(const GranulationResult& x, const GranulationResult& y, const std::string& what) {
    ASSERT_EQ(x.balls.size(), y.balls.size()) << what;
    for (std::size_t i = 0; i < x.balls.size(); ++i) {
        ASSERT_EQ(x.balls[i].center_id, y.balls[i].center_id) << what << " ball " << i;
        ASSERT_EQ(x.balls[i].radius, y.balls[i].radius) << what << " ball " << i;
        ASSERT_EQ(x.balls[i].member_ids, y.balls[i].member_ids) << what << " ball " << i;
        ASSERT_EQ(x.balls[i].kind, y.balls[i].kind) << what << " ball " << i;
    }
    EXPECT_EQ(x.noise_ids, y.noise_ids) << what;
    EXPECT_EQ(x.low_density_ids, y.low_density_ids) << what;
    EXPECT_EQ(x.iterations, y.iterations) << what;
}

} // namespace

TEST(RunRdgbg, IndexedAndReferenceRoutesAgree) {
    for (std::uint64_t seed = 100; seed < 130; ++seed) {
        const auto c = oracle::random_case(seed, 500);
        RngStream a(seed), b(seed);
        const auto x = run_rdgbg(c.data, RdgbgOptions{.rho = 5, .indexed = true}, a);
        const auto y = run_rdgbg(c.data, RdgbgOptions{.rho = 5, .indexed = false}, b);
        expect_same(x, y, c.description);
    }
}

TEST(RunRdgbg, RoutesAgreeOnIntegerGridWithTies) {
    // integer coordinates make distance ties between classes common
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        RngStream g(seed);
        const std::size_t n = 30 + g.uniform_index(150);
        const std::size_t p = 1 + g.uniform_index(3);
        const std::size_t q = 2 + g.uniform_index(3);
        std::vector<std::vector<double>> rows;
        std::vector<ClassId> labels;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> r;
            for (std::size_t d = 0; d < p; ++d) {
                r.push_back(static_cast<double>(g.uniform_index(6)));
            }
            rows.push_back(r);
            labels.push_back(static_cast<ClassId>(g.uniform_index(q)));
        }
        const auto d = oracle::make_dataset(rows, labels, q);
        for (int rho : {2, 3, 5}) {
            RngStream a(seed + 1000), b(seed + 1000);
            const auto x = run_rdgbg(d, RdgbgOptions{.rho = rho, .audit = true, .indexed = true}, a);
            const auto y = run_rdgbg(d, RdgbgOptions{.rho = rho, .indexed = false}, b);
            expect_same(x, y, "grid seed " + std::to_string(seed) + " rho " + std::to_string(rho));
            EXPECT_EQ(oracle::check_granulation(d, x), "");
        }
    }
}
