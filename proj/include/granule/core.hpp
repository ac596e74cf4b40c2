#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

/**
 * @file core.hpp
 * @brief Domain types, distance, and the seeded random stream shared by every module.
 */

namespace granule {

using SampleId = std::size_t;
using ClassId = int;

/// Bad input or arguments supplied by the caller. Maps to CLI exit code 2.
class usage_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An internal invariant was broken. Maps to CLI exit code 3.
class invariant_error : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Slack for containment and overlap checks on radius `radius`.
inline double float_slack(double radius) {
    return 1e-9 * (1.0 + radius);
}

/**
 * Euclidean distance between two equal-length vectors.
 * Throws `usage_error` on a length mismatch.
 */
inline double distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw usage_error("distance: length mismatch (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

/// Read-only view of one row of a `Dataset`.
struct Sample {
    SampleId id;
    std::span<const double> features;
    ClassId label;
};

/**
 * @brief Immutable numeric feature matrix with dense integer class labels.
 *
 * Features are stored row-major. Sample ids are row positions. Class ids are
 * `0..num_classes()-1`; `label_names()[c]` holds the raw label string for class `c`.
 * A dataset may carry classes with zero samples (e.g. a training fold that
 * misses a rare class); class ids always refer to the full label table.
 */
class Dataset {
public:
    Dataset() = default;

    /**
     * Validates and builds a dataset. `features` holds `labels.size() * num_features` values.
     * Throws `usage_error` when the shape is inconsistent, a value is not finite,
     * or a label falls outside `label_names`.
     */
    Dataset(std::vector<double> features,
            std::vector<ClassId> labels,
            std::size_t num_features,
            std::vector<std::string> label_names,
            std::vector<std::string> feature_names = {},
            std::string label_name = "class",
            std::optional<std::size_t> label_position = std::nullopt)
        : features_(std::move(features)),
          labels_(std::move(labels)),
          p_(num_features),
          label_names_(std::move(label_names)),
          feature_names_(std::move(feature_names)),
          label_name_(std::move(label_name)),
          label_position_(label_position.value_or(num_features)) {
        if (labels_.empty()) {
            throw usage_error("dataset must contain at least one sample");
        }
        if (p_ == 0) {
            throw usage_error("dataset must have at least one feature");
        }
        if (features_.size() != labels_.size() * p_) {
            throw usage_error("feature matrix size does not match N * p");
        }
        if (label_names_.empty()) {
            throw usage_error("dataset must declare at least one class");
        }
        if (!feature_names_.empty() && feature_names_.size() != p_) {
            throw usage_error("feature_names must have p entries");
        }
        if (label_position_ > p_) {
            throw usage_error("label_position out of range");
        }
        for (double v : features_) {
            if (!std::isfinite(v)) {
                throw usage_error("dataset contains a non-finite feature value");
            }
        }
        const auto q = static_cast<ClassId>(label_names_.size());
        for (ClassId l : labels_) {
            if (l < 0 || l >= q) {
                throw usage_error("label " + std::to_string(l) + " outside class table");
            }
        }
    }

    std::size_t size() const { return labels_.size(); }
    std::size_t num_features() const { return p_; }
    std::size_t num_classes() const { return label_names_.size(); }

    std::span<const double> features(SampleId id) const {
        return {features_.data() + id * p_, p_};
    }
    double feature(SampleId id, std::size_t dim) const { return features_[id * p_ + dim]; }
    ClassId label(SampleId id) const { return labels_[id]; }
    Sample sample(SampleId id) const { return {id, features(id), labels_[id]}; }

    const std::vector<double>& feature_matrix() const { return features_; }
    const std::vector<ClassId>& labels() const { return labels_; }
    const std::vector<std::string>& label_names() const { return label_names_; }
    const std::vector<std::string>& feature_names() const { return feature_names_; }
    const std::string& label_name() const { return label_name_; }
    /// Column index of the label in the source file (p means "last").
    std::size_t label_position() const { return label_position_; }

    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(num_classes(), 0);
        for (ClassId l : labels_) {
            ++counts[static_cast<std::size_t>(l)];
        }
        return counts;
    }

    /// Rows `ids` (in the given order) as a new dataset with ids renumbered from 0.
    Dataset subset(std::span<const SampleId> ids) const {
        std::vector<double> f;
        f.reserve(ids.size() * p_);
        std::vector<ClassId> l;
        l.reserve(ids.size());
        for (SampleId id : ids) {
            if (id >= size()) {
                throw usage_error("subset id " + std::to_string(id) + " out of range");
            }
            auto row = features(id);
            f.insert(f.end(), row.begin(), row.end());
            l.push_back(labels_[id]);
        }
        return Dataset(std::move(f), std::move(l), p_, label_names_, feature_names_, label_name_, label_position_);
    }

    /// Same features and metadata, new labels.
    Dataset with_labels(std::vector<ClassId> labels) const {
        return Dataset(features_, std::move(labels), p_, label_names_, feature_names_, label_name_, label_position_);
    }

    /// Same labels and metadata, new feature matrix.
    Dataset with_features(std::vector<double> features) const {
        return Dataset(std::move(features), labels_, p_, label_names_, feature_names_, label_name_, label_position_);
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    std::vector<double> features_;
    std::vector<ClassId> labels_;
    std::size_t p_ = 0;
    std::vector<std::string> label_names_;
    std::vector<std::string> feature_names_;
    std::string label_name_;
    std::size_t label_position_ = 0;
};

struct DatasetSummary {
    std::size_t n_samples = 0;
    std::size_t n_features = 0;
    std::size_t n_classes = 0;
    std::vector<std::size_t> class_counts;
    double imbalance_ratio = 1.0;
};

/**
 * Table-style counts. `n_classes` and the imbalance ratio only consider
 * classes that actually have samples.
 */
inline DatasetSummary summarize(const Dataset& data) {
    DatasetSummary s;
    s.n_samples = data.size();
    s.n_features = data.num_features();
    s.class_counts = data.class_counts();
    std::size_t lo = std::numeric_limits<std::size_t>::max();
    std::size_t hi = 0;
    for (std::size_t c : s.class_counts) {
        if (c == 0) {
            continue;
        }
        ++s.n_classes;
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    s.imbalance_ratio = static_cast<double>(hi) / static_cast<double>(lo);
    return s;
}

/// Per-feature affine map to [0,1] fitted on one dataset and applicable to others.
struct MinMaxScaler {
    std::vector<double> lo;
    std::vector<double> span;

    static MinMaxScaler fit(const Dataset& data) {
        const std::size_t p = data.num_features();
        MinMaxScaler s;
        s.lo.assign(p, std::numeric_limits<double>::infinity());
        std::vector<double> hi(p, -std::numeric_limits<double>::infinity());
        for (SampleId i = 0; i < data.size(); ++i) {
            for (std::size_t d = 0; d < p; ++d) {
                s.lo[d] = std::min(s.lo[d], data.feature(i, d));
                hi[d] = std::max(hi[d], data.feature(i, d));
            }
        }
        s.span.resize(p);
        for (std::size_t d = 0; d < p; ++d) {
            s.span[d] = hi[d] - s.lo[d];
        }
        return s;
    }

    // Constant features map to 0.
    Dataset transform(const Dataset& data) const {
        if (data.num_features() != lo.size()) {
            throw usage_error("scaler fitted on a different feature count");
        }
        std::vector<double> f = data.feature_matrix();
        const std::size_t p = lo.size();
        for (std::size_t i = 0; i < f.size(); ++i) {
            const std::size_t d = i % p;
            f[i] = span[d] > 0.0 ? (f[i] - lo[d]) / span[d] : 0.0;
        }
        return data.with_features(std::move(f));
    }
};

inline Dataset normalize_min_max(const Dataset& data) {
    return MinMaxScaler::fit(data).transform(data);
}

/**
 * @brief Portable seeded pseudo-random stream.
 *
 * The generator is xoshiro256** (Blackman & Vigna) whose four state words are
 * filled by successive splitmix64 outputs starting from `seed`. Derived draws:
 *
 * - `uniform_index(n)`: rejection sampling. Let `t = (2^64 - n) mod n`; draw
 *   `x = next_u64()` until `x >= t`, return `x mod n`.
 * - `uniform01()`: `(next_u64() >> 11) * 2^-53`, in [0,1).
 * - `normal()`: Box-Muller on two `uniform01()` draws `u1, u2` as
 *   `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`; the sine partner is discarded.
 *
 * Any implementation following these rules reproduces the stream draw for draw.
 */
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0) : seed_(seed) {
        std::uint64_t sm = seed;
        for (auto& w : state_) {
            w = splitmix64(sm);
        }
    }

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    std::uint64_t uniform_index(std::uint64_t n) {
        if (n == 0) {
            throw usage_error("uniform_index: empty range");
        }
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t x = next_u64();
            if (x >= threshold) {
                return x % n;
            }
        }
    }

    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double normal() {
        const double u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    /// Partial Fisher-Yates: the first `k` entries of the returned vector
    /// are a uniform sample without replacement from `0..n-1`.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        if (k > n) {
            throw usage_error("cannot draw more items than exist");
        }
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(uniform_index(n - i));
            std::swap(perm[i], perm[j]);
        }
        perm.resize(k);
        return perm;
    }

    /// Seed for an independent sub-stream keyed by `(seed, a, b)`.
    static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
        std::uint64_t s = seed ^ 0x6a09e667f3bcc909ULL;
        std::uint64_t h = splitmix64(s);
        s = h ^ (a + 0x9e3779b97f4a7c15ULL);
        h = splitmix64(s);
        s = h ^ (b + 0xbb67ae8584caa73bULL);
        return splitmix64(s);
    }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t seed_;
    std::uint64_t state_[4]{};
};

/// Half-away-from-zero rounding of `ratio * n`, clamped to `[0, n]`.
inline std::size_t round_count(double ratio, std::size_t n) {
    const double v = std::round(ratio * static_cast<double>(n));
    if (v <= 0.0) {
        return 0;
    }
    return std::min(n, static_cast<std::size_t>(v));
}

} // namespace granule
