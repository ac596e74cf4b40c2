#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "granule/core.hpp"
#include "granule/rdgbg.hpp"

/**
 * @file gbabs.hpp
 * @brief Approximate borderline sampling on a granular-ball cover.
 *
 * For every feature dimension the ball centers are sorted by that coordinate.
 * Two neighbors in that order with different labels mark a class boundary;
 * each of the two balls then contributes the member lying closest to the
 * boundary along that dimension (the left ball its maximum, the right ball its
 * minimum). The union over all dimensions is the sampled set.
 */

namespace granule {

struct CenterRecord {
    std::size_t ball_id = 0;
    std::vector<double> center;
    ClassId label = 0;
};

struct BorderlinePair {
    std::size_t dim = 0;
    std::size_t left_ball = 0;
    std::size_t right_ball = 0;
    SampleId left_sample = 0;
    SampleId right_sample = 0;
};

struct SampledDataset {
    std::vector<SampleId> sample_ids; // ascending, unique
    std::vector<BorderlinePair> pairs;
    std::size_t source_n = 0;
    double ratio = 0.0;
};

inline std::vector<CenterRecord> center_set(const GranulationResult& res) {
    std::vector<CenterRecord> out;
    out.reserve(res.balls.size());
    for (const auto& b : res.balls) {
        out.push_back({b.ball_id, b.center, b.label});
    }
    std::sort(out.begin(), out.end(), [](const CenterRecord& a, const CenterRecord& b) { return a.ball_id < b.ball_id; });
    return out;
}

/// Heterogeneous neighbors in the order of coordinate `dim` (ties by ball id).
/// Sample fields of the returned pairs are left at 0.
inline std::vector<BorderlinePair> borderline_pairs_along_dim(std::span<const CenterRecord> centers, std::size_t dim) {
    std::vector<BorderlinePair> out;
    if (centers.size() < 2) {
        return out;
    }
    if (dim >= centers.front().center.size()) {
        throw usage_error("dimension out of range");
    }
    std::vector<std::size_t> order(centers.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ca = centers[a].center[dim];
        const double cb = centers[b].center[dim];
        return ca < cb || (ca == cb && centers[a].ball_id < centers[b].ball_id);
    });
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const auto& l = centers[order[i]];
        const auto& r = centers[order[i + 1]];
        if (l.label != r.label) {
            out.push_back({dim, l.ball_id, r.ball_id, 0, 0});
        }
    }
    return out;
}

/// Fills in the boundary-facing member of each ball (ties by smaller id).
inline BorderlinePair extract_pair_samples(BorderlinePair pair, std::span<const GranularBall> balls, const Dataset& data) {
    const auto& left = balls[pair.left_ball].member_ids;
    const auto& right = balls[pair.right_ball].member_ids;
    const std::size_t d = pair.dim;

    SampleId best = left.front();
    for (SampleId id : left) {
        const double v = data.feature(id, d);
        const double bv = data.feature(best, d);
        if (v > bv || (v == bv && id < best)) {
            best = id;
        }
    }
    pair.left_sample = best;

    best = right.front();
    for (SampleId id : right) {
        const double v = data.feature(id, d);
        const double bv = data.feature(best, d);
        if (v < bv || (v == bv && id < best)) {
            best = id;
        }
    }
    pair.right_sample = best;
    return pair;
}

/// Borderline sampling over an existing granulation of `data`.
inline SampledDataset sample_borderline(const GranulationResult& res, const Dataset& data) {
    SampledDataset s;
    s.source_n = data.size();
    const auto centers = center_set(res);
    for (std::size_t dim = 0; dim < data.num_features(); ++dim) {
        for (const auto& pair : borderline_pairs_along_dim(centers, dim)) {
            const auto filled = extract_pair_samples(pair, res.balls, data);
            s.pairs.push_back(filled);
            s.sample_ids.push_back(filled.left_sample);
            s.sample_ids.push_back(filled.right_sample);
        }
    }
    std::sort(s.sample_ids.begin(), s.sample_ids.end());
    s.sample_ids.erase(std::unique(s.sample_ids.begin(), s.sample_ids.end()), s.sample_ids.end());
    s.ratio = static_cast<double>(s.sample_ids.size()) / static_cast<double>(s.source_n);
    return s;
}

inline std::pair<SampledDataset, GranulationResult> run_gbabs(const Dataset& data, const RdgbgOptions& opts, RngStream& rng) {
    GranulationResult g = run_rdgbg(data, opts, rng);
    SampledDataset s = sample_borderline(g, data);
    return {std::move(s), std::move(g)};
}

inline std::pair<SampledDataset, GranulationResult> run_gbabs(const Dataset& data, int rho, RngStream& rng) {
    return run_gbabs(data, RdgbgOptions{.rho = rho}, rng);
}

} // namespace granule
