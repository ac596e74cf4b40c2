#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "granule/core.hpp"
#include "granule/spatial.hpp"

/**
 * @file rdgbg.hpp
 * @brief Restricted-diffusion granular-ball generation.
 *
 * Balls are grown around randomly drawn, locally consistent centers over the
 * set of undivided samples U. A ball stops diffusing at the first
 * heterogeneous sample or at the surface of an earlier ball, so every ball is
 * pure and no two balls overlap. Candidates whose neighborhood is too mixed
 * are parked in the low-density set L; the run ends once U is a subset of L,
 * and whatever is left becomes radius-0 orphan balls.
 */

namespace granule {

enum class BallKind { regular, orphan_low_density, orphan_undivided };

inline const char* to_string(BallKind k) {
    switch (k) {
    case BallKind::regular: return "regular";
    case BallKind::orphan_low_density: return "orphan_low_density";
    case BallKind::orphan_undivided: return "orphan_undivided";
    }
    return "unknown";
}

struct GranularBall {
    std::size_t ball_id = 0;
    SampleId center_id = 0;
    std::vector<double> center;
    double radius = 0.0;
    ClassId label = 0;
    std::vector<SampleId> member_ids; // ascending, includes center_id
    BallKind kind = BallKind::regular;
};

struct GranulationResult {
    std::vector<GranularBall> balls;      // creation order; ball_id == index
    std::vector<SampleId> noise_ids;      // ascending
    std::vector<SampleId> low_density_ids; // ascending; every id that ever entered L
    std::size_t iterations = 0;
    int rho = 0;
    std::uint64_t seed = 0;
};

namespace detail {

/// Fenwick tree over 0/1 flags with order-statistic lookup.
class FlagTree {
public:
    explicit FlagTree(std::size_t n = 0) : tree_(n + 1, 0) {
        step_ = 1;
        while (step_ * 2 <= n) step_ *= 2;
    }

    void add(std::size_t i, int delta) {
        for (++i; i < tree_.size(); i += i & (~i + 1)) {
            tree_[i] += delta;
        }
        total_ += delta;
    }

    std::size_t total() const { return static_cast<std::size_t>(total_); }

    /// Index of the k-th (0-based) set flag.
    std::size_t select(std::size_t k) const {
        std::size_t pos = 0;
        auto rem = static_cast<long long>(k) + 1;
        for (std::size_t s = step_; s > 0; s /= 2) {
            if (pos + s < tree_.size() && tree_[pos + s] < rem) {
                pos += s;
                rem -= tree_[pos];
            }
        }
        return pos;
    }

private:
    std::vector<long long> tree_;
    std::size_t step_ = 1;
    long long total_ = 0;
};

} // namespace detail

/**
 * The undivided set U together with the low-density marks L.
 *
 * Besides O(1) membership and removal it keeps, per class, an order-statistic
 * index of the potential centers U - L, so that the k-th smallest potential
 * center of a class is found in O(log N).
 */
class UndividedSet {
public:
    /// U = every sample of `data`, L empty.
    explicit UndividedSet(const Dataset& data)
        : labels_(&data.labels()), pos_(data.size()), low_(data.size(), false), ever_low_(data.size(), false),
          potential_(data.num_classes(), detail::FlagTree(data.size())) {
        ids_.resize(data.size());
        for (SampleId i = 0; i < data.size(); ++i) {
            ids_[i] = i;
            pos_[i] = i;
            potential_[label_index(i)].add(i, 1);
        }
    }

    /// U = `undivided`, L = `low_density`. Requires L ⊆ U.
    UndividedSet(const Dataset& data, std::span<const SampleId> undivided, std::span<const SampleId> low_density)
        : labels_(&data.labels()), pos_(data.size(), npos), low_(data.size(), false), ever_low_(data.size(), false),
          potential_(data.num_classes(), detail::FlagTree(data.size())) {
        for (SampleId id : undivided) {
            if (id >= data.size()) {
                throw usage_error("undivided id out of range");
            }
            if (pos_[id] == npos) {
                pos_[id] = ids_.size();
                ids_.push_back(id);
                potential_[label_index(id)].add(id, 1);
            }
        }
        for (SampleId id : low_density) {
            if (id >= data.size() || pos_[id] == npos) {
                throw usage_error("low-density ids must be undivided");
            }
            mark_low_density(id);
        }
    }

    bool contains(SampleId id) const { return pos_[id] != npos; }
    bool is_low_density(SampleId id) const { return low_[id]; }
    bool was_low_density(SampleId id) const { return ever_low_[id]; }
    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    /// Members of U in unspecified order.
    std::span<const SampleId> ids() const { return ids_; }

    /// True when U ⊆ L.
    bool only_low_density() const { return low_in_u_ == ids_.size(); }

    std::size_t num_classes() const { return potential_.size(); }
    /// |U - L| restricted to class `label`.
    std::size_t potential_count(ClassId label) const { return potential_[static_cast<std::size_t>(label)].total(); }
    /// The k-th smallest id (0-based) of U - L within class `label`.
    SampleId potential_at(ClassId label, std::size_t k) const {
        return potential_[static_cast<std::size_t>(label)].select(k);
    }

    void remove(SampleId id) {
        const std::size_t p = pos_[id];
        if (p == npos) {
            throw invariant_error("removing sample " + std::to_string(id) + " that is not undivided");
        }
        const SampleId last = ids_.back();
        ids_[p] = last;
        pos_[last] = p;
        ids_.pop_back();
        pos_[id] = npos;
        if (low_[id]) {
            low_[id] = false;
            --low_in_u_;
        } else {
            potential_[label_index(id)].add(id, -1);
        }
    }

    void mark_low_density(SampleId id) {
        if (!contains(id)) {
            throw invariant_error("only undivided samples can become low-density");
        }
        if (!low_[id]) {
            low_[id] = true;
            ever_low_[id] = true;
            ++low_in_u_;
            potential_[label_index(id)].add(id, -1);
        }
    }

    std::vector<SampleId> ever_low_density() const {
        std::vector<SampleId> out;
        for (SampleId i = 0; i < ever_low_.size(); ++i) {
            if (ever_low_[i]) {
                out.push_back(i);
            }
        }
        return out;
    }

private:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    std::size_t label_index(SampleId id) const { return static_cast<std::size_t>((*labels_)[id]); }

    const std::vector<ClassId>* labels_;
    std::vector<SampleId> ids_;
    std::vector<std::size_t> pos_;
    std::vector<bool> low_;
    std::vector<bool> ever_low_;
    std::vector<detail::FlagTree> potential_;
    std::size_t low_in_u_ = 0;
};

struct ClassGroup {
    ClassId label = 0;
    std::vector<SampleId> ids; // ascending
};

struct Candidate {
    SampleId id = 0;
    ClassId label = 0;
};

/// Distance from a candidate center to one other undivided sample.
struct Neighbor {
    double dist = 0.0;
    SampleId id = 0;
    ClassId label = 0;
};

/// Orders neighbors by distance, ties by smaller id.
inline bool closer(const Neighbor& a, const Neighbor& b) {
    return a.dist < b.dist || (a.dist == b.dist && a.id < b.id);
}

enum class VerdictKind { accepted, accepted_with_noise_removal, center_is_noise, low_density };

struct CenterVerdict {
    VerdictKind kind = VerdictKind::accepted;
    std::optional<SampleId> removed_id;
    int h = 0;
};

struct Detection {
    CenterVerdict verdict;
    std::vector<Neighbor> neighbors; // over U minus the candidate, unordered
};

enum class RadiusRule { cr_rule, rmax_rule };

struct RadiusChoice {
    double cr = 0.0;
    double r_conf = std::numeric_limits<double>::infinity();
    double r_max = 0.0;
    double chosen = 0.0;
    RadiusRule rule = RadiusRule::cr_rule;
};

/**
 * Groups U - L by label, largest group first (ties: smaller class id first).
 * Ids inside each group are ascending.
 */
inline std::vector<ClassGroup> group_potential_centers(const UndividedSet& u, const Dataset& data) {
    std::vector<ClassGroup> groups(data.num_classes());
    for (std::size_t c = 0; c < groups.size(); ++c) {
        groups[c].label = static_cast<ClassId>(c);
    }
    for (SampleId id : u.ids()) {
        if (!u.is_low_density(id)) {
            groups[static_cast<std::size_t>(data.label(id))].ids.push_back(id);
        }
    }
    std::erase_if(groups, [](const ClassGroup& g) { return g.ids.empty(); });
    for (auto& g : groups) {
        std::sort(g.ids.begin(), g.ids.end());
    }
    std::stable_sort(groups.begin(), groups.end(), [](const ClassGroup& a, const ClassGroup& b) {
        return a.ids.size() > b.ids.size();
    });
    return groups;
}

/// One uniformly drawn member per group, in group order.
inline std::vector<Candidate> draw_candidate_centers(std::span<const ClassGroup> groups, RngStream& rng) {
    std::vector<Candidate> out;
    out.reserve(groups.size());
    for (const auto& g : groups) {
        const auto k = rng.uniform_index(g.ids.size());
        out.push_back({g.ids[k], g.label});
    }
    return out;
}

/**
 * Same draw as `draw_candidate_centers(group_potential_centers(u, data), rng)`
 * without materializing the groups: O(q log N) instead of O(|U| log |U|).
 */
inline std::vector<Candidate> draw_candidate_centers(const UndividedSet& u, RngStream& rng) {
    std::vector<ClassId> order;
    for (std::size_t c = 0; c < u.num_classes(); ++c) {
        if (u.potential_count(static_cast<ClassId>(c)) > 0) {
            order.push_back(static_cast<ClassId>(c));
        }
    }
    std::stable_sort(order.begin(), order.end(), [&u](ClassId a, ClassId b) {
        return u.potential_count(a) > u.potential_count(b);
    });
    std::vector<Candidate> out;
    out.reserve(order.size());
    for (ClassId c : order) {
        const auto k = rng.uniform_index(u.potential_count(c));
        out.push_back({u.potential_at(c, static_cast<std::size_t>(k)), c});
    }
    return out;
}

/**
 * Local-density check of a candidate against the current U.
 *
 * Returns the verdict together with the distances from the candidate to
 * every other undivided sample so that radius computation can reuse them.
 * The effective tolerance is `min(rho, |U| - 1)`.
 */
inline Detection detect_center(Candidate cand, const UndividedSet& u, const Dataset& data, int rho) {
    if (rho < 2) {
        throw usage_error("density tolerance rho must be >= 2");
    }
    if (!u.contains(cand.id)) {
        throw invariant_error("candidate " + std::to_string(cand.id) + " is not undivided");
    }
    Detection det;
    det.neighbors.reserve(u.size());
    const auto c = data.features(cand.id);
    for (SampleId id : u.ids()) {
        if (id != cand.id) {
            det.neighbors.push_back({distance(c, data.features(id)), id, data.label(id)});
        }
    }
    if (det.neighbors.empty()) {
        return det;
    }

    const Neighbor nearest = *std::min_element(det.neighbors.begin(), det.neighbors.end(), closer);
    if (nearest.label == cand.label) {
        return det;
    }

    const std::size_t eff = std::min(static_cast<std::size_t>(rho), det.neighbors.size());
    std::vector<Neighbor> knn = det.neighbors;
    std::nth_element(knn.begin(), knn.begin() + static_cast<std::ptrdiff_t>(eff - 1), knn.end(), closer);
    int h = 0;
    for (std::size_t i = 0; i < eff; ++i) {
        h += knn[i].label != cand.label ? 1 : 0;
    }
    det.verdict.h = h;
    if (static_cast<std::size_t>(h) == eff) {
        det.verdict.kind = VerdictKind::center_is_noise;
    } else if (h == 1) {
        det.verdict.kind = VerdictKind::accepted_with_noise_removal;
        det.verdict.removed_id = nearest.id;
    } else {
        det.verdict.kind = VerdictKind::low_density;
    }
    return det;
}

/**
 * Locally consistent radius: the largest distance among the homogeneous
 * neighbors that lie strictly closer than the nearest heterogeneous one.
 * With no heterogeneous neighbor left it is the distance to the farthest
 * neighbor; with no neighbors it is 0.
 */
inline double consistent_radius(ClassId label, std::span<const Neighbor> neighbors) {
    double het = std::numeric_limits<double>::infinity();
    for (const auto& n : neighbors) {
        if (n.label != label) {
            het = std::min(het, n.dist);
        }
    }
    double cr = 0.0;
    for (const auto& n : neighbors) {
        if (n.label == label && n.dist < het) {
            cr = std::max(cr, n.dist);
        }
    }
    return cr;
}

/**
 * Smallest gap between `center` and the surface of an existing ball, or +inf
 * without balls. A non-positive gap means the center sits inside a ball,
 * which the partitioning never allows; that throws `invariant_error`.
 */
inline double conflict_radius(std::span<const double> center, std::span<const GranularBall> balls) {
    double r = std::numeric_limits<double>::infinity();
    for (const auto& b : balls) {
        const double gap = distance(center, b.center) - b.radius;
        if (gap <= 0.0) {
            throw invariant_error("candidate center lies inside ball " + std::to_string(b.ball_id) +
                                  " (gap " + std::to_string(gap) + ")");
        }
        r = std::min(r, gap);
    }
    return r;
}

/// Final radius: CR if it fits under the conflict radius, else the largest
/// neighbor distance that still does. Zero means "send the center to L".
inline RadiusChoice choose_radius(double cr, double r_conf, std::span<const Neighbor> neighbors) {
    RadiusChoice rc;
    rc.cr = cr;
    rc.r_conf = r_conf;
    if (cr <= r_conf) {
        rc.rule = RadiusRule::cr_rule;
        rc.chosen = cr;
        return rc;
    }
    rc.rule = RadiusRule::rmax_rule;
    for (const auto& n : neighbors) {
        if (n.dist <= r_conf) {
            rc.r_max = std::max(rc.r_max, n.dist);
        }
    }
    rc.chosen = rc.r_max;
    return rc;
}

/// The center plus every neighbor within `radius`, ascending. Throws
/// `invariant_error` if a heterogeneous sample would be captured.
inline std::vector<SampleId> collect_members(Candidate cand, double radius, std::span<const Neighbor> neighbors) {
    std::vector<SampleId> members{cand.id};
    for (const auto& n : neighbors) {
        if (n.dist <= radius) {
            if (n.label != cand.label) {
                throw invariant_error("ball around " + std::to_string(cand.id) + " would capture heterogeneous sample " +
                                      std::to_string(n.id));
            }
            members.push_back(n.id);
        }
    }
    std::sort(members.begin(), members.end());
    return members;
}

struct RdgbgOptions {
    int rho = 5;
    // Re-checks that every undivided sample lies strictly outside every ball
    // after each construction. O(|U| * m) per ball; meant for tests.
    bool audit = false;
    // false: per-candidate full sweeps through the step-by-step operations
    // above. true: the same decisions answered by a KD-tree.
    bool indexed = true;
};

namespace detail {

inline void audit_exteriority(const UndividedSet& u, const Dataset& data, std::span<const GranularBall> balls) {
    for (SampleId id : u.ids()) {
        for (const auto& b : balls) {
            if (distance(data.features(id), b.center) <= b.radius) {
                throw invariant_error("undivided sample " + std::to_string(id) + " lies inside ball " +
                                      std::to_string(b.ball_id));
            }
        }
    }
}

// What processing one candidate decided.
struct Step {
    VerdictKind verdict = VerdictKind::accepted;
    std::optional<SampleId> removed;
    double radius = 0.0; // 0: candidate goes to L
    std::vector<SampleId> members;
};

inline Step step_reference(Candidate cand, const UndividedSet& u, const Dataset& data, int rho,
                           std::span<const GranularBall> balls) {
    Step st;
    Detection det = detect_center(cand, u, data, rho);
    st.verdict = det.verdict.kind;
    if (st.verdict == VerdictKind::center_is_noise || st.verdict == VerdictKind::low_density) {
        return st;
    }
    if (st.verdict == VerdictKind::accepted_with_noise_removal) {
        const SampleId gone = *det.verdict.removed_id;
        st.removed = gone;
        std::erase_if(det.neighbors, [gone](const Neighbor& n) { return n.id == gone; });
    }
    const double cr = consistent_radius(cand.label, det.neighbors);
    const double r_conf = conflict_radius(data.features(cand.id), balls);
    const RadiusChoice rc = choose_radius(cr, r_conf, det.neighbors);
    st.radius = rc.chosen;
    if (st.radius > 0.0) {
        st.members = collect_members(cand, rc.chosen, det.neighbors);
    }
    return st;
}

// Point index over U plus the balls built so far, stored flat for the
// conflict-radius scan.
struct Indexes {
    explicit Indexes(const Dataset& data) : points(data), p(data.num_features()) {}

    void add_ball(std::span<const double> center, double radius) {
        centers.insert(centers.end(), center.begin(), center.end());
        radii.push_back(radius);
    }

    // Same value as `conflict_radius` over the same balls.
    double min_gap(std::span<const double> c) const {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < radii.size(); ++b) {
            best = std::min(best, distance(c, std::span<const double>(centers.data() + b * p, p)) - radii[b]);
        }
        return best;
    }

    KdIndex points;
    std::size_t p;
    std::vector<double> centers; // balls x features
    std::vector<double> radii;
};

inline Step step_indexed(Candidate cand, const UndividedSet& u, Indexes& ix, const Dataset& data, int rho) {
    KdIndex& index = ix.points;
    Step st;
    const auto c = data.features(cand.id);
    const std::size_t others = u.size() - 1;
    if (others > 0) {
        const auto nn = index.nearest(c, 1, cand.id);
        if (nn.front().label != cand.label) {
            const std::size_t eff = std::min(static_cast<std::size_t>(rho), others);
            const auto knn = index.nearest(c, eff, cand.id);
            const auto h = static_cast<std::size_t>(std::count_if(
                knn.begin(), knn.end(), [&](const IndexHit& x) { return x.label != cand.label; }));
            if (h == eff) {
                st.verdict = VerdictKind::center_is_noise;
                return st;
            }
            if (h != 1) {
                st.verdict = VerdictKind::low_density;
                return st;
            }
            st.verdict = VerdictKind::accepted_with_noise_removal;
            st.removed = nn.front().id;
            index.remove(nn.front().id);
        }
    }

    // Members are the neighbors strictly closer than the nearest heterogeneous
    // sample and not beyond the conflict radius; the radius is the farthest of them.
    const double r_conf = ix.min_gap(c);
    if (r_conf <= 0.0) {
        throw invariant_error("candidate center " + std::to_string(cand.id) + " lies inside a ball (gap " +
                              std::to_string(r_conf) + ")");
    }
    const auto hits = index.consistent_within(c, r_conf, cand.label, cand.id);
    for (const auto& h : hits) {
        st.radius = std::max(st.radius, h.dist);
    }
    if (st.radius > 0.0) {
        st.members.reserve(hits.size() + 1);
        st.members.push_back(cand.id);
        for (const auto& h : hits) {
            if (h.label != cand.label) {
                throw invariant_error("ball around " + std::to_string(cand.id) + " would capture heterogeneous sample " +
                                      std::to_string(h.id));
            }
            if (h.dist <= st.radius) {
                st.members.push_back(h.id);
            }
        }
        std::sort(st.members.begin(), st.members.end());
    }
    return st;
}

} // namespace detail

/**
 * Runs the full granulation. Deterministic given `(data, opts.rho, rng seed)`;
 * the indexed and reference routes produce identical results.
 */
inline GranulationResult run_rdgbg(const Dataset& data, const RdgbgOptions& opts, RngStream& rng) {
    if (data.size() == 0) {
        throw usage_error("cannot granulate an empty dataset");
    }
    if (opts.rho < 2) {
        throw usage_error("density tolerance rho must be >= 2");
    }

    GranulationResult res;
    res.rho = opts.rho;
    res.seed = rng.seed();
    UndividedSet u(data);
    std::optional<detail::Indexes> index;
    if (opts.indexed) {
        index.emplace(data);
    }
    auto drop = [&](SampleId id) {
        u.remove(id);
        if (index) {
            index->points.remove(id);
        }
    };

    while (!u.only_low_density()) {
        ++res.iterations;
        const auto candidates = draw_candidate_centers(u, rng);

        for (const Candidate& cand : candidates) {
            // absorbed or removed by an earlier candidate of this round
            if (!u.contains(cand.id) || u.is_low_density(cand.id)) {
                continue;
            }
            detail::Step st = index ? detail::step_indexed(cand, u, *index, data, opts.rho)
                                    : detail::step_reference(cand, u, data, opts.rho, res.balls);
            if (st.verdict == VerdictKind::center_is_noise) {
                drop(cand.id);
                res.noise_ids.push_back(cand.id);
                continue;
            }
            if (st.verdict == VerdictKind::low_density) {
                u.mark_low_density(cand.id);
                continue;
            }
            if (st.removed) {
                drop(*st.removed);
                res.noise_ids.push_back(*st.removed);
            }
            if (st.radius <= 0.0) {
                u.mark_low_density(cand.id);
                continue;
            }

            GranularBall ball;
            ball.ball_id = res.balls.size();
            ball.center_id = cand.id;
            const auto center = data.features(cand.id);
            ball.center.assign(center.begin(), center.end());
            ball.radius = st.radius;
            ball.label = cand.label;
            ball.member_ids = std::move(st.members);
            ball.kind = BallKind::regular;
            for (SampleId m : ball.member_ids) {
                drop(m);
            }
            if (index) {
                index->add_ball(ball.center, ball.radius);
            }
            res.balls.push_back(std::move(ball));
            if (opts.audit) {
                detail::audit_exteriority(u, data, res.balls);
            }
        }
    }

    std::vector<SampleId> rest(u.ids().begin(), u.ids().end());
    std::sort(rest.begin(), rest.end());
    for (SampleId id : rest) {
        GranularBall orphan;
        orphan.ball_id = res.balls.size();
        orphan.center_id = id;
        const auto f = data.features(id);
        orphan.center.assign(f.begin(), f.end());
        orphan.radius = 0.0;
        orphan.label = data.label(id);
        orphan.member_ids = {id};
        orphan.kind = u.was_low_density(id) ? BallKind::orphan_low_density : BallKind::orphan_undivided;
        res.balls.push_back(std::move(orphan));
    }

    std::sort(res.noise_ids.begin(), res.noise_ids.end());
    res.low_density_ids = u.ever_low_density();
    return res;
}

inline GranulationResult run_rdgbg(const Dataset& data, int rho, RngStream& rng) {
    return run_rdgbg(data, RdgbgOptions{.rho = rho}, rng);
}

} // namespace granule
