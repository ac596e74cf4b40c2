#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "granule/core.hpp"

// Experimental scaffolding: random-sampling baseline, label-noise injection,
// and seeded synthetic datasets.

namespace granule {

struct NoiseSpec {
    double ratio = 0.0;
    std::uint64_t seed = 0;
    std::vector<SampleId> flipped_ids; // ascending
};

/// Simple random sampling without replacement of round(ratio * N) ids, ascending.
inline std::vector<SampleId> srs_sample(const Dataset& data, double ratio, RngStream& rng) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) {
        throw usage_error("sampling ratio must lie in [0, 1]");
    }
    auto ids = rng.sample_without_replacement(data.size(), round_count(ratio, data.size()));
    std::sort(ids.begin(), ids.end());
    return ids;
}

/**
 * Flips the labels of round(ratio * N) uniformly chosen samples, each to a
 * uniformly chosen different class. Features are never touched.
 */
inline std::pair<Dataset, NoiseSpec> inject_class_noise(const Dataset& data, double ratio, RngStream& rng) {
    if (!(ratio >= 0.0 && ratio < 1.0)) {
        throw usage_error("noise ratio must lie in [0, 1)");
    }
    const std::size_t q = data.num_classes();
    if (q < 2) {
        throw usage_error("label noise needs at least two classes");
    }
    NoiseSpec spec;
    spec.ratio = ratio;
    spec.seed = rng.seed();
    spec.flipped_ids = rng.sample_without_replacement(data.size(), round_count(ratio, data.size()));
    std::vector<ClassId> labels = data.labels();
    for (SampleId id : spec.flipped_ids) {
        auto next = static_cast<ClassId>(rng.uniform_index(q - 1));
        if (next >= labels[id]) {
            ++next;
        }
        labels[id] = next;
    }
    std::sort(spec.flipped_ids.begin(), spec.flipped_ids.end());
    return {data.with_labels(std::move(labels)), std::move(spec)};
}

namespace detail {

inline std::vector<std::string> numbered_names(std::size_t n, const std::string& prefix = "") {
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(prefix + std::to_string(i));
    }
    return out;
}

} // namespace detail

/**
 * `q` isotropic Gaussian clusters of `n_per_class` points each in `p` dimensions.
 *
 * When `q <= p` class `c` is centered at `separation / sqrt(2)` along axis `c`,
 * so every pair of centers is exactly `separation` apart. Otherwise centers sit
 * at `c * separation` along axis 0. Samples are emitted class by class.
 */
inline Dataset gen_blobs(std::size_t n_per_class, std::size_t q, std::size_t p, double separation, double spread,
                         RngStream& rng) {
    if (n_per_class == 0 || q == 0 || p == 0 || !(separation > 0.0) || !(spread > 0.0)) {
        throw usage_error("gen_blobs parameters must be positive");
    }
    std::vector<double> f;
    f.reserve(n_per_class * q * p);
    std::vector<ClassId> labels;
    labels.reserve(n_per_class * q);
    for (std::size_t c = 0; c < q; ++c) {
        std::vector<double> mu(p, 0.0);
        if (q <= p) {
            mu[c] = separation / std::sqrt(2.0);
        } else {
            mu[0] = static_cast<double>(c) * separation;
        }
        for (std::size_t i = 0; i < n_per_class; ++i) {
            for (std::size_t d = 0; d < p; ++d) {
                f.push_back(mu[d] + spread * rng.normal());
            }
            labels.push_back(static_cast<ClassId>(c));
        }
    }
    return Dataset(std::move(f), std::move(labels), p, detail::numbered_names(q), detail::numbered_names(p, "x"));
}

/// Concentric 2-D annuli, one class per ring. Radii jitter uniformly within
/// `thickness` around each nominal radius; angles are uniform.
inline Dataset gen_rings(std::size_t n_per_ring, std::span<const double> radii, double thickness, RngStream& rng) {
    if (n_per_ring == 0 || radii.empty() || !(thickness >= 0.0)) {
        throw usage_error("gen_rings needs a positive ring size and at least one radius");
    }
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!(radii[i] > 0.0) || (i > 0 && !(radii[i] > radii[i - 1]))) {
            throw usage_error("ring radii must be positive and strictly increasing");
        }
        if (i > 0 && !(thickness < radii[i] - radii[i - 1])) {
            throw usage_error("ring thickness must be smaller than the gap between rings");
        }
    }
    constexpr double two_pi = 6.28318530717958647692;
    std::vector<double> f;
    std::vector<ClassId> labels;
    for (std::size_t r = 0; r < radii.size(); ++r) {
        for (std::size_t i = 0; i < n_per_ring; ++i) {
            const double theta = two_pi * rng.uniform01();
            const double rad = radii[r] + thickness * (rng.uniform01() - 0.5);
            f.push_back(rad * std::cos(theta));
            f.push_back(rad * std::sin(theta));
            labels.push_back(static_cast<ClassId>(r));
        }
    }
    return Dataset(std::move(f), std::move(labels), 2, detail::numbered_names(radii.size()), {"x0", "x1"});
}

} // namespace granule
