#include <gtest/gtest.h>

#include <cmath>

#include "granule/core.hpp"
#include "oracles.hpp"

using namespace granule;

TEST(Distance, PythagoreanTriple) {
    const std::vector<double> a{0, 0}, b{3, 4};
    EXPECT_DOUBLE_EQ(distance(a, b), 5.0);
}

TEST(Distance, IdenticalVectorsAreZero) {
    const std::vector<double> v{1.5, -2.25, 7};
    EXPECT_EQ(distance(v, v), 0.0);
}

TEST(Distance, ThreeDimensional) {
    const std::vector<double> a{1, 2, 3}, b{4, 6, 3};
    EXPECT_DOUBLE_EQ(distance(a, b), 5.0);
}

TEST(Distance, LengthMismatchIsUsageError) {
    const std::vector<double> a{1, 2}, b{1, 2, 3};
    EXPECT_THROW(distance(a, b), usage_error);
}

TEST(Distance, MetricAxiomsOnRandomTriples) {
    RngStream rng(2024);
    for (int t = 0; t < 2000; ++t) {
        const std::size_t p = 1 + rng.uniform_index(12);
        std::vector<double> a(p), b(p), c(p);
        for (std::size_t i = 0; i < p; ++i) {
            a[i] = 10 * rng.normal();
            b[i] = 10 * rng.normal();
            c[i] = 10 * rng.normal();
        }
        const double ab = distance(a, b), ba = distance(b, a), bc = distance(b, c), ac = distance(a, c);
        EXPECT_EQ(ab, ba);
        EXPECT_GE(ab, 0.0);
        EXPECT_LE(ac, ab + bc + 1e-12 * (1 + ab + bc));
        EXPECT_NEAR(ab, oracle::euclid(a, b), 1e-12 * (1 + ab));
    }
}

TEST(Dataset, RejectsInconsistentInput) {
    EXPECT_THROW(Dataset({1, 2, 3}, {0, 1}, 2, {"a", "b"}), usage_error);
    EXPECT_THROW(Dataset({1, 2}, {0, 2}, 1, {"a", "b"}), usage_error);
    EXPECT_THROW(Dataset({1, NAN}, {0, 1}, 1, {"a", "b"}), usage_error);
    EXPECT_THROW(Dataset({}, {}, 1, {"a"}), usage_error);
}

TEST(Dataset, SubsetRenumbersAndKeepsLabelTable) {
    const auto d = oracle::make_1d({0, 1, 2, 3}, {0, 1, 1, 0});
    const std::vector<SampleId> ids{3, 1};
    const auto s = d.subset(ids);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s.feature(0, 0), 3.0);
    EXPECT_EQ(s.label(1), 1);
    EXPECT_EQ(s.label_names(), d.label_names());
}

TEST(Summarize, SingleClassHasUnitImbalance) {
    const auto d = oracle::make_1d({1, 2, 3, 4, 5, 6, 7}, {0, 0, 0, 0, 0, 0, 0});
    const auto s = summarize(d);
    EXPECT_EQ(s.n_samples, 7u);
    EXPECT_EQ(s.n_classes, 1u);
    EXPECT_EQ(s.class_counts, std::vector<std::size_t>{7});
    EXPECT_EQ(s.imbalance_ratio, 1.0);
}

TEST(Summarize, TenAndFortyGivesFour) {
    std::vector<double> xs;
    std::vector<ClassId> ls;
    for (int i = 0; i < 50; ++i) {
        xs.push_back(i);
        ls.push_back(i < 10 ? 0 : 1);
    }
    const auto d = oracle::make_1d(xs, ls);
    const auto before = d;
    const auto s = summarize(d);
    EXPECT_EQ(s.imbalance_ratio, 4.0);
    EXPECT_EQ(s.class_counts[0] + s.class_counts[1], s.n_samples);
    EXPECT_EQ(d, before);
}

TEST(Summarize, AbsentClassesAreIgnored) {
    const auto d = oracle::make_1d({0, 1, 2}, {0, 0, 2}, 3);
    const auto s = summarize(d);
    EXPECT_EQ(s.n_classes, 2u);
    EXPECT_EQ(s.imbalance_ratio, 2.0);
}

TEST(MinMaxScaler, MapsToUnitIntervalAndConstantToZero) {
    const auto d = oracle::make_dataset({{0, 5}, {10, 5}, {5, 5}}, {0, 1, 0});
    const auto n = normalize_min_max(d);
    EXPECT_EQ(n.feature(0, 0), 0.0);
    EXPECT_EQ(n.feature(1, 0), 1.0);
    EXPECT_EQ(n.feature(2, 0), 0.5);
    EXPECT_EQ(n.feature(1, 1), 0.0);
    EXPECT_EQ(n.labels(), d.labels());
}

TEST(RngStream, MatchesReferenceSequence) {
    std::uint64_t x = 0;
    EXPECT_EQ(RngStream::splitmix64(x), 0xe220a8397b1dcdafULL);

    RngStream a(0);
    EXPECT_EQ(a.next_u64(), 0x99ec5f36cb75f2b4ULL);
    EXPECT_EQ(a.next_u64(), 0xbf6e1f784956452aULL);
    EXPECT_EQ(a.next_u64(), 0x1a5f849d4933e6e0ULL);

    RngStream b(42);
    EXPECT_EQ(b.next_u64(), 0x15780b2e0c2ec716ULL);
    EXPECT_EQ(b.next_u64(), 0x6104d9866d113a7eULL);

    RngStream c(7);
    EXPECT_DOUBLE_EQ(c.uniform01(), 0.7005764821796896);
    EXPECT_DOUBLE_EQ(c.uniform01(), 0.2787512294737843);

    RngStream d(123);
    std::vector<std::uint64_t> idx;
    for (int i = 0; i < 5; ++i) {
        idx.push_back(d.uniform_index(10));
    }
    EXPECT_EQ(idx, (std::vector<std::uint64_t>{7, 8, 7, 0, 4}));
}

TEST(RngStream, EqualSeedsGiveIdenticalMillionDraws) {
    RngStream a(99), b(99);
    bool same = true;
    for (int i = 0; i < 1000000; ++i) {
        same = same && a.next_u64() == b.next_u64();
    }
    EXPECT_TRUE(same);
}

TEST(RngStream, SampleWithoutReplacementIsDistinctAndInRange) {
    RngStream rng(5);
    auto s = rng.sample_without_replacement(100, 37);
    ASSERT_EQ(s.size(), 37u);
    std::sort(s.begin(), s.end());
    EXPECT_EQ(std::unique(s.begin(), s.end()), s.end());
    EXPECT_LT(s.back(), 100u);
    EXPECT_THROW(rng.sample_without_replacement(3, 4), usage_error);
}

TEST(RngStream, NormalHasRoughlyUnitMoments) {
    RngStream rng(11);
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.01);
    EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(RngStream, DerivedSeedsDiffer) {
    EXPECT_NE(RngStream::derive_seed(1, 0, 0), RngStream::derive_seed(1, 0, 1));
    EXPECT_NE(RngStream::derive_seed(1, 1, 0), RngStream::derive_seed(1, 0, 1));
    EXPECT_EQ(RngStream::derive_seed(8, 3, 4), RngStream::derive_seed(8, 3, 4));
}

TEST(RoundCount, HalfAwayFromZero) {
    EXPECT_EQ(round_count(0.5, 5), 3u);
    EXPECT_EQ(round_count(0.25, 10), 3u);
    EXPECT_EQ(round_count(0.2, 100), 20u);
    EXPECT_EQ(round_count(1.0, 7), 7u);
    EXPECT_EQ(round_count(0.0, 7), 0u);
}
