#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "granule/core.hpp"

// Exact KD-tree queries used by the granulation loop. Every distance is
// computed with `granule::distance(query, row)`, so values match a
// brute-force sweep bit for bit.

namespace granule {

namespace detail {

/// Static KD partition of a dataset's rows (median split on the widest axis).
class KdLayout {
public:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    struct Node {
        std::size_t begin = 0;
        std::size_t end = 0;
        std::size_t left = npos;
        std::size_t right = npos;
        std::size_t parent = npos;
    };

    explicit KdLayout(const Dataset& data, std::size_t leaf_size = 12)
        : data_(&data), p_(data.num_features()), leaf_size_(std::max<std::size_t>(leaf_size, 1)), leaf_of_(data.size(), 0) {
        perm_.resize(data.size());
        std::iota(perm_.begin(), perm_.end(), SampleId{0});
        if (!perm_.empty()) {
            build(0, perm_.size(), npos);
        }
    }

    const Dataset& data() const { return *data_; }
    std::size_t size() const { return nodes_.size(); }
    const Node& node(std::size_t n) const { return nodes_[n]; }
    bool is_leaf(std::size_t n) const { return nodes_[n].left == npos; }
    SampleId point(std::size_t i) const { return perm_[i]; }
    std::size_t leaf_of(SampleId id) const { return leaf_of_[id]; }

    // Lower bound on the distance from `query` to the box of node `n`, shaded
    // down slightly so rounding never prunes a point that ties the bound.
    double box_bound(std::size_t n, std::span<const double> query) const {
        double acc = 0.0;
        const double* lo = lo_.data() + n * p_;
        const double* hi = hi_.data() + n * p_;
        for (std::size_t d = 0; d < p_; ++d) {
            const double v = query[d];
            const double g = v < lo[d] ? lo[d] - v : (v > hi[d] ? v - hi[d] : 0.0);
            acc += g * g;
        }
        return std::sqrt(acc) * (1.0 - 1e-12);
    }

private:
    std::size_t build(std::size_t begin, std::size_t end, std::size_t parent) {
        const std::size_t idx = nodes_.size();
        nodes_.push_back({begin, end, npos, npos, parent});
        lo_.resize(nodes_.size() * p_);
        hi_.resize(nodes_.size() * p_);
        std::size_t split_dim = 0;
        double widest = -1.0;
        for (std::size_t d = 0; d < p_; ++d) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -std::numeric_limits<double>::infinity();
            for (std::size_t i = begin; i < end; ++i) {
                const double v = data_->feature(perm_[i], d);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            lo_[idx * p_ + d] = lo;
            hi_[idx * p_ + d] = hi;
            if (hi - lo > widest) {
                widest = hi - lo;
                split_dim = d;
            }
        }
        if (end - begin <= leaf_size_ || widest <= 0.0) {
            for (std::size_t i = begin; i < end; ++i) {
                leaf_of_[perm_[i]] = idx;
            }
            return idx;
        }
        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(perm_.begin() + static_cast<std::ptrdiff_t>(begin), perm_.begin() + static_cast<std::ptrdiff_t>(mid),
                         perm_.begin() + static_cast<std::ptrdiff_t>(end), [&](SampleId a, SampleId b) {
                             return data_->feature(a, split_dim) < data_->feature(b, split_dim);
                         });
        const std::size_t l = build(begin, mid, idx);
        const std::size_t r = build(mid, end, idx);
        nodes_[idx].left = l;
        nodes_[idx].right = r;
        return idx;
    }

    const Dataset* data_;
    std::size_t p_;
    std::size_t leaf_size_;
    std::vector<SampleId> perm_;
    std::vector<Node> nodes_;
    std::vector<double> lo_; // nodes x features
    std::vector<double> hi_;
    std::vector<std::size_t> leaf_of_;
};

} // namespace detail

/// One point returned by a `KdIndex` query.
struct IndexHit {
    double dist = 0.0;
    SampleId id = 0;
    ClassId label = 0;
};

/**
 * @brief Nearest-neighbor and range queries over the alive rows of a dataset.
 *
 * Starts with every row alive; rows are deleted as they leave the undivided
 * set. Neighbor ranking is by (distance, id). Per-node, per-class alive counts
 * let label-filtered queries skip subtrees without a matching point.
 */
class KdIndex {
public:
    enum class LabelFilter { any, same, other };

    explicit KdIndex(const Dataset& data)
        : tree_(data), q_(data.num_classes()), alive_(data.size(), true), node_alive_(tree_.size(), 0),
          counts_(tree_.size() * q_, 0) {
        for (SampleId id = 0; id < data.size(); ++id) {
            for (std::size_t n = tree_.leaf_of(id); n != npos; n = tree_.node(n).parent) {
                ++node_alive_[n];
                ++counts_[n * q_ + static_cast<std::size_t>(data.label(id))];
            }
        }
    }

    bool alive(SampleId id) const { return alive_[id]; }

    void remove(SampleId id) {
        if (!alive_[id]) {
            return;
        }
        alive_[id] = false;
        const auto l = static_cast<std::size_t>(tree_.data().label(id));
        for (std::size_t n = tree_.leaf_of(id); n != npos; n = tree_.node(n).parent) {
            --node_alive_[n];
            --counts_[n * q_ + l];
        }
    }

    /**
     * The `k` nearest alive points to `query` (excluding `exclude`) whose label
     * passes `filter` relative to `label`, sorted by (distance, id).
     */
    std::vector<IndexHit> nearest(std::span<const double> query, std::size_t k, SampleId exclude,
                                  LabelFilter filter = LabelFilter::any, ClassId label = 0) const {
        std::vector<IndexHit> best;
        if (k == 0 || tree_.size() == 0) {
            return best;
        }
        best.reserve(k + 1);
        knn(0, query, k, exclude, filter, label, best);
        return best;
    }

    /// Alive points other than `exclude` with `dist <= incl` and `dist < excl`, unordered.
    std::vector<IndexHit> within(std::span<const double> query, double incl, double excl, SampleId exclude) const {
        std::vector<IndexHit> out;
        if (tree_.size() > 0) {
            range(0, query, incl, excl, exclude, out);
        }
        return out;
    }

    /**
     * Alive points other than `exclude` with `dist <= incl` that are strictly
     * closer than every alive point labeled differently from `label`, unordered.
     * Equivalent to `within(query, incl, d_other, exclude)` with `d_other` the
     * distance of the nearest differently-labeled point, in one traversal.
     */
    std::vector<IndexHit> consistent_within(std::span<const double> query, double incl, ClassId label,
                                            SampleId exclude) const {
        std::vector<IndexHit> out;
        double excl = std::numeric_limits<double>::infinity();
        if (tree_.size() > 0) {
            consistent(0, tree_.box_bound(0, query), query, incl, label, exclude, excl, out);
        }
        std::erase_if(out, [excl](const IndexHit& h) { return !(h.dist < excl); });
        return out;
    }

private:
    static constexpr std::size_t npos = detail::KdLayout::npos;

    void consistent(std::size_t n, double bound, std::span<const double> query, double incl, ClassId label,
                    SampleId exclude, double& excl, std::vector<IndexHit>& out) const {
        if (node_alive_[n] == 0 || bound > incl || bound > excl) {
            return;
        }
        const auto& node = tree_.node(n);
        if (tree_.is_leaf(n)) {
            const Dataset& data = tree_.data();
            for (std::size_t i = node.begin; i < node.end; ++i) {
                const SampleId id = tree_.point(i);
                if (!alive_[id] || id == exclude) {
                    continue;
                }
                const double dist = distance(query, data.features(id));
                const ClassId l = data.label(id);
                if (l != label) {
                    excl = std::min(excl, dist);
                } else if (dist <= incl && dist < excl) {
                    out.push_back({dist, id, l});
                }
            }
            return;
        }
        const double bl = tree_.box_bound(node.left, query);
        const double br = tree_.box_bound(node.right, query);
        if (bl <= br) {
            consistent(node.left, bl, query, incl, label, exclude, excl, out);
            consistent(node.right, br, query, incl, label, exclude, excl, out);
        } else {
            consistent(node.right, br, query, incl, label, exclude, excl, out);
            consistent(node.left, bl, query, incl, label, exclude, excl, out);
        }
    }

    static bool better(const IndexHit& a, const IndexHit& b) {
        return a.dist < b.dist || (a.dist == b.dist && a.id < b.id);
    }

    std::size_t passing(std::size_t n, LabelFilter filter, ClassId label) const {
        if (filter == LabelFilter::any) {
            return node_alive_[n];
        }
        const std::size_t same = counts_[n * q_ + static_cast<std::size_t>(label)];
        return filter == LabelFilter::same ? same : node_alive_[n] - same;
    }

    void knn(std::size_t n, std::span<const double> query, std::size_t k, SampleId exclude, LabelFilter filter,
             ClassId label, std::vector<IndexHit>& best) const {
        if (passing(n, filter, label) == 0) {
            return;
        }
        if (best.size() == k && tree_.box_bound(n, query) > best.back().dist) {
            return;
        }
        const auto& node = tree_.node(n);
        if (tree_.is_leaf(n)) {
            const Dataset& data = tree_.data();
            for (std::size_t i = node.begin; i < node.end; ++i) {
                const SampleId id = tree_.point(i);
                if (!alive_[id] || id == exclude) {
                    continue;
                }
                const ClassId l = data.label(id);
                if ((filter == LabelFilter::same && l != label) || (filter == LabelFilter::other && l == label)) {
                    continue;
                }
                const IndexHit hit{distance(query, data.features(id)), id, l};
                if (best.size() < k || better(hit, best.back())) {
                    best.insert(std::upper_bound(best.begin(), best.end(), hit, better), hit);
                    if (best.size() > k) {
                        best.pop_back();
                    }
                }
            }
            return;
        }
        const double bl = tree_.box_bound(node.left, query);
        const double br = tree_.box_bound(node.right, query);
        const std::size_t first = bl <= br ? node.left : node.right;
        const std::size_t second = bl <= br ? node.right : node.left;
        knn(first, query, k, exclude, filter, label, best);
        knn(second, query, k, exclude, filter, label, best);
    }

    void range(std::size_t n, std::span<const double> query, double incl, double excl, SampleId exclude,
               std::vector<IndexHit>& out) const {
        if (node_alive_[n] == 0) {
            return;
        }
        const double b = tree_.box_bound(n, query);
        if (b > incl || b > excl) {
            return;
        }
        const auto& node = tree_.node(n);
        if (tree_.is_leaf(n)) {
            const Dataset& data = tree_.data();
            for (std::size_t i = node.begin; i < node.end; ++i) {
                const SampleId id = tree_.point(i);
                if (!alive_[id] || id == exclude) {
                    continue;
                }
                const double dist = distance(query, data.features(id));
                if (dist <= incl && dist < excl) {
                    out.push_back({dist, id, data.label(id)});
                }
            }
            return;
        }
        range(node.left, query, incl, excl, exclude, out);
        range(node.right, query, incl, excl, exclude, out);
    }

    detail::KdLayout tree_;
    std::size_t q_;
    std::vector<bool> alive_;
    std::vector<std::size_t> node_alive_;
    std::vector<std::size_t> counts_; // nodes x classes
};

} // namespace granule
