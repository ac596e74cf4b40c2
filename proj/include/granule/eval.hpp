#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "granule/core.hpp"
#include "granule/gbabs.hpp"
#include "granule/harness.hpp"

/**
 * @file eval.hpp
 * @brief Built-in classifiers and the repeated cross-validation protocol.
 */

namespace granule {

// ---------------------------------------------------------------------------
// k-nearest neighbors

/**
 * Majority label among the `k` nearest training samples (k is clamped to the
 * training size). Neighbors are ranked by squared Euclidean distance, ties by
 * smaller id; vote ties go to the smaller class id.
 */
inline ClassId knn_predict(const Dataset& train, std::span<const double> query, std::size_t k) {
    if (train.size() == 0) {
        throw usage_error("knn_predict: empty training set");
    }
    if (k == 0) {
        throw usage_error("knn_predict: k must be positive");
    }
    if (query.size() != train.num_features()) {
        throw usage_error("knn_predict: query has the wrong number of features");
    }
    k = std::min(k, train.size());
    const std::size_t p = train.num_features();
    const double* f = train.feature_matrix().data();
    std::vector<std::pair<double, SampleId>> d(train.size());
    for (SampleId i = 0; i < train.size(); ++i) {
        double acc = 0.0;
        const double* row = f + i * p;
        for (std::size_t j = 0; j < p; ++j) {
            const double t = row[j] - query[j];
            acc += t * t;
        }
        d[i] = {acc, i};
    }
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
    std::vector<std::size_t> votes(train.num_classes(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        ++votes[static_cast<std::size_t>(train.label(d[i].second))];
    }
    return static_cast<ClassId>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

// ---------------------------------------------------------------------------
// CART decision tree

/**
 * Binary CART tree with Gini impurity and no pruning.
 *
 * A node becomes a leaf when it is pure or when no feature takes two distinct
 * values in it; otherwise it is split on the best axis-aligned threshold (a
 * midpoint between consecutive distinct values), even if that split does not
 * reduce impurity. Ties prefer the smaller feature index, then the smaller
 * threshold. Leaves predict their majority class (ties: smaller class id).
 */
class DecisionTree {
public:
    struct Node {
        int feature = -1; // -1 for leaves
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        ClassId label = 0;
    };

    static DecisionTree fit(const Dataset& train) {
        if (train.size() == 0) {
            throw usage_error("dt_fit: empty training set");
        }
        DecisionTree tree;
        tree.p_ = train.num_features();
        std::vector<SampleId> all(train.size());
        std::iota(all.begin(), all.end(), SampleId{0});

        struct Work {
            int node;
            std::vector<SampleId> ids;
        };
        std::vector<Work> stack;
        tree.nodes_.emplace_back();
        stack.push_back({0, std::move(all)});
        const std::size_t q = train.num_classes();

        while (!stack.empty()) {
            Work w = std::move(stack.back());
            stack.pop_back();

            std::vector<std::size_t> counts(q, 0);
            for (SampleId id : w.ids) {
                ++counts[static_cast<std::size_t>(train.label(id))];
            }
            const auto majority = static_cast<ClassId>(std::max_element(counts.begin(), counts.end()) - counts.begin());
            tree.nodes_[static_cast<std::size_t>(w.node)].label = majority;
            if (counts[static_cast<std::size_t>(majority)] == w.ids.size()) {
                continue;
            }

            const auto split = best_split(train, w.ids, counts);
            if (!split) {
                continue;
            }
            std::vector<SampleId> left_ids;
            std::vector<SampleId> right_ids;
            for (SampleId id : w.ids) {
                (train.feature(id, split->feature) <= split->threshold ? left_ids : right_ids).push_back(id);
            }
            const int l = static_cast<int>(tree.nodes_.size());
            tree.nodes_.emplace_back();
            const int r = static_cast<int>(tree.nodes_.size());
            tree.nodes_.emplace_back();
            Node& n = tree.nodes_[static_cast<std::size_t>(w.node)];
            n.feature = static_cast<int>(split->feature);
            n.threshold = split->threshold;
            n.left = l;
            n.right = r;
            stack.push_back({r, std::move(right_ids)});
            stack.push_back({l, std::move(left_ids)});
        }
        return tree;
    }

    ClassId predict(std::span<const double> x) const {
        if (x.size() != p_) {
            throw usage_error("dt_predict: query has the wrong number of features");
        }
        std::size_t i = 0;
        while (nodes_[i].feature >= 0) {
            const Node& n = nodes_[i];
            i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
        }
        return nodes_[i].label;
    }

    const std::vector<Node>& nodes() const { return nodes_; }
    std::size_t leaf_count() const {
        return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.feature < 0; }));
    }

private:
    struct Split {
        std::size_t feature;
        double threshold;
    };

    // Weighted Gini impurity times node size: sum over sides of n_side - sum_k c_k^2 / n_side.
    static std::optional<Split> best_split(const Dataset& train, const std::vector<SampleId>& ids,
                                          const std::vector<std::size_t>& counts) {
        const std::size_t n = ids.size();
        const std::size_t q = counts.size();
        std::optional<Split> best;
        double best_score = std::numeric_limits<double>::infinity();
        std::vector<std::pair<double, ClassId>> col(n);
        std::vector<double> left(q);
        std::vector<double> right(q);

        for (std::size_t f = 0; f < train.num_features(); ++f) {
            for (std::size_t i = 0; i < n; ++i) {
                col[i] = {train.feature(ids[i], f), train.label(ids[i])};
            }
            std::sort(col.begin(), col.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            if (col.front().first == col.back().first) {
                continue;
            }
            std::fill(left.begin(), left.end(), 0.0);
            double left_sq = 0.0;
            double right_sq = 0.0;
            for (std::size_t k = 0; k < q; ++k) {
                right[k] = static_cast<double>(counts[k]);
                right_sq += right[k] * right[k];
            }
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const auto c = static_cast<std::size_t>(col[i].second);
                left_sq += 2.0 * left[c] + 1.0;
                left[c] += 1.0;
                right_sq -= 2.0 * right[c] - 1.0;
                right[c] -= 1.0;
                if (col[i].first == col[i + 1].first) {
                    continue;
                }
                const double nl = static_cast<double>(i + 1);
                const double nr = static_cast<double>(n - i - 1);
                const double score = (nl - left_sq / nl) + (nr - right_sq / nr);
                if (score < best_score - 1e-9) {
                    best_score = score;
                    double thr = 0.5 * (col[i].first + col[i + 1].first);
                    if (!(thr < col[i + 1].first)) {
                        thr = col[i].first;
                    }
                    best = Split{f, thr};
                }
            }
        }
        return best;
    }

    std::vector<Node> nodes_;
    std::size_t p_ = 0;
};

inline DecisionTree dt_fit(const Dataset& train) { return DecisionTree::fit(train); }
inline ClassId dt_predict(const DecisionTree& model, std::span<const double> x) { return model.predict(x); }

// ---------------------------------------------------------------------------
// metrics

struct Metrics {
    double accuracy = 0.0;
    double gmean = 0.0;
    double sampling_ratio = 1.0;
    double granulation_ms = 0.0;
    double sampling_ms = 0.0;
    double train_ms = 0.0;
    double predict_ms = 0.0;
};

/// Accuracy, and the geometric mean of per-class recall over the classes present in `truths`.
inline Metrics compute_metrics(std::span<const ClassId> predictions, std::span<const ClassId> truths, double sampling_ratio) {
    if (predictions.size() != truths.size() || truths.empty()) {
        throw usage_error("compute_metrics: predictions and truths must be equal-length and non-empty");
    }
    ClassId top = 0;
    for (ClassId t : truths) {
        top = std::max(top, t);
    }
    std::vector<std::size_t> support(static_cast<std::size_t>(top) + 1, 0);
    std::vector<std::size_t> hit(support.size(), 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        const auto t = static_cast<std::size_t>(truths[i]);
        ++support[t];
        if (predictions[i] == truths[i]) {
            ++correct;
            ++hit[t];
        }
    }
    Metrics m;
    m.accuracy = static_cast<double>(correct) / static_cast<double>(truths.size());
    m.sampling_ratio = sampling_ratio;
    double log_sum = 0.0;
    std::size_t present = 0;
    bool zero = false;
    for (std::size_t c = 0; c < support.size(); ++c) {
        if (support[c] == 0) {
            continue;
        }
        ++present;
        if (hit[c] == 0) {
            zero = true;
            break;
        }
        log_sum += std::log(static_cast<double>(hit[c]) / static_cast<double>(support[c]));
    }
    m.gmean = zero ? 0.0 : std::exp(log_sum / static_cast<double>(present));
    return m;
}

// ---------------------------------------------------------------------------
// cross-validation

enum class ClassifierKind { knn, dt };
enum class SamplerKind { none, gbabs, srs };

inline const char* to_string(ClassifierKind k) { return k == ClassifierKind::knn ? "knn" : "dt"; }
inline const char* to_string(SamplerKind s) {
    switch (s) {
    case SamplerKind::none: return "none";
    case SamplerKind::gbabs: return "gbabs";
    case SamplerKind::srs: return "srs";
    }
    return "unknown";
}

struct EvalConfig {
    ClassifierKind classifier = ClassifierKind::dt;
    std::size_t k = 5;
    std::size_t folds = 5;
    std::size_t repeats = 5;
    SamplerKind sampler = SamplerKind::none;
    int rho = 5;
    double noise_ratio = 0.0;
    std::uint64_t seed = 0;
    bool normalize = true;
    // 0 = one worker per hardware thread
    std::size_t threads = 0;

    void validate() const {
        if (folds < 2) throw usage_error("folds must be >= 2");
        if (repeats < 1) throw usage_error("repeats must be >= 1");
        if (k < 1) throw usage_error("k must be >= 1");
        if (rho < 2) throw usage_error("rho must be >= 2");
        if (!(noise_ratio >= 0.0 && noise_ratio < 1.0)) throw usage_error("noise ratio must lie in [0, 1)");
    }
};

struct FoldResult {
    std::size_t repeat = 0;
    std::size_t fold = 0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::size_t sampled_size = 0;  // training rows handed to the classifier
    std::size_t gbabs_size = 0;    // GBABS selection size (gbabs and srs samplers)
    bool failed = false;
    std::string diagnostic;
    bool leakage_ok = true;
    Metrics metrics;
};

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0; // sample standard deviation, 0 for a single fold
};

struct EvalReport {
    EvalConfig config;
    DatasetSummary summary;
    bool stratified = true;
    std::size_t noise_flipped = 0;
    std::vector<FoldResult> folds; // ordered by (repeat, fold)
    std::size_t failed_folds = 0;
    bool leakage_audit_passed = true;
    Aggregate accuracy;
    Aggregate gmean;
    Aggregate sampling_ratio;
    Aggregate granulation_ms;
    Aggregate sampling_ms;
    Aggregate train_ms;
    Aggregate predict_ms;
};

/// Mean and sample standard deviation of `v`.
inline Aggregate aggregate(std::span<const double> v) {
    Aggregate a;
    if (v.empty()) {
        return a;
    }
    a.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) {
            ss += (x - a.mean) * (x - a.mean);
        }
        a.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return a;
}

struct FoldAssignment {
    std::vector<std::size_t> fold_of; // per sample
    bool stratified = true;
};

/**
 * Shuffles each class and deals the concatenation round-robin into folds, so
 * every fold has N/folds (+1) samples and near-equal class proportions. Falls
 * back to an unstratified shuffle when a present class has fewer than `folds`
 * members.
 */
inline FoldAssignment stratified_folds(const Dataset& data, std::size_t folds, RngStream& rng) {
    if (folds < 2 || folds > data.size()) {
        throw usage_error("fold count must lie in [2, N]");
    }
    FoldAssignment fa;
    fa.fold_of.assign(data.size(), 0);
    const auto counts = data.class_counts();
    fa.stratified = std::none_of(counts.begin(), counts.end(), [folds](std::size_t c) { return c > 0 && c < folds; });

    std::vector<SampleId> order;
    order.reserve(data.size());
    if (fa.stratified) {
        std::vector<std::vector<SampleId>> by_class(data.num_classes());
        for (SampleId i = 0; i < data.size(); ++i) {
            by_class[static_cast<std::size_t>(data.label(i))].push_back(i);
        }
        for (const auto& members : by_class) {
            const auto perm = rng.sample_without_replacement(members.size(), members.size());
            for (std::size_t j : perm) {
                order.push_back(members[j]);
            }
        }
    } else {
        const auto perm = rng.sample_without_replacement(data.size(), data.size());
        order.assign(perm.begin(), perm.end());
    }
    for (std::size_t j = 0; j < order.size(); ++j) {
        fa.fold_of[order[j]] = j % folds;
    }
    return fa;
}

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

inline FoldResult run_fold(const Dataset& data, const FoldAssignment& fa, std::size_t repeat, std::size_t fold,
                           const EvalConfig& cfg) {
    using clock = std::chrono::steady_clock;
    FoldResult fr;
    fr.repeat = repeat;
    fr.fold = fold;

    std::vector<SampleId> train_ids;
    std::vector<SampleId> test_ids;
    std::vector<bool> is_test(data.size(), false);
    for (SampleId i = 0; i < data.size(); ++i) {
        if (fa.fold_of[i] == fold) {
            test_ids.push_back(i);
            is_test[i] = true;
        } else {
            train_ids.push_back(i);
        }
    }
    fr.train_size = train_ids.size();
    fr.test_size = test_ids.size();

    Dataset train = data.subset(train_ids);
    Dataset test = data.subset(test_ids);
    if (cfg.normalize) {
        const auto scaler = MinMaxScaler::fit(train);
        train = scaler.transform(train);
        test = scaler.transform(test);
    }

    // Local ids of `train` that reach the classifier.
    std::vector<SampleId> chosen;
    RngStream rng(RngStream::derive_seed(cfg.seed, repeat + 1, fold + 1));
    if (cfg.sampler == SamplerKind::none) {
        chosen.resize(train.size());
        std::iota(chosen.begin(), chosen.end(), SampleId{0});
    } else {
        auto t0 = clock::now();
        const GranulationResult g = run_rdgbg(train, cfg.rho, rng);
        fr.metrics.granulation_ms = elapsed_ms(t0);
        t0 = clock::now();
        const SampledDataset s = sample_borderline(g, train);
        fr.gbabs_size = s.sample_ids.size();
        if (cfg.sampler == SamplerKind::gbabs) {
            chosen = s.sample_ids;
        } else {
            RngStream srs_rng(RngStream::derive_seed(cfg.seed, repeat + 1, 1000 + fold));
            chosen = srs_sample(train, s.ratio, srs_rng);
        }
        fr.metrics.sampling_ms = elapsed_ms(t0);
    }
    fr.sampled_size = chosen.size();
    fr.metrics.sampling_ratio = static_cast<double>(chosen.size()) / static_cast<double>(train.size());

    // Every row the sampler saw and every row the classifier trains on must map
    // back to a training id of this fold.
    for (SampleId local : chosen) {
        if (local >= train_ids.size() || is_test[train_ids[local]]) {
            fr.leakage_ok = false;
        }
    }
    for (SampleId id : train_ids) {
        if (is_test[id]) {
            fr.leakage_ok = false;
        }
    }

    if (chosen.empty()) {
        fr.failed = true;
        fr.diagnostic = "sampler returned an empty training set";
        return fr;
    }
    const Dataset fit_set = train.subset(chosen);

    std::vector<ClassId> preds(test.size());
    auto t0 = clock::now();
    if (cfg.classifier == ClassifierKind::dt) {
        const DecisionTree tree = DecisionTree::fit(fit_set);
        fr.metrics.train_ms = elapsed_ms(t0);
        t0 = clock::now();
        for (SampleId i = 0; i < test.size(); ++i) {
            preds[i] = tree.predict(test.features(i));
        }
    } else {
        fr.metrics.train_ms = elapsed_ms(t0);
        t0 = clock::now();
        for (SampleId i = 0; i < test.size(); ++i) {
            preds[i] = knn_predict(fit_set, test.features(i), cfg.k);
        }
    }
    fr.metrics.predict_ms = elapsed_ms(t0);

    const Metrics m = compute_metrics(preds, test.labels(), fr.metrics.sampling_ratio);
    fr.metrics.accuracy = m.accuracy;
    fr.metrics.gmean = m.gmean;
    return fr;
}

} // namespace detail

/**
 * Repeated (stratified) k-fold evaluation.
 *
 * When `noise_ratio > 0` label noise is injected once, before any split. Per
 * repeat the fold split is seeded from `(seed, repeat)` and per fold the
 * sampler from `(seed, repeat, fold)`, so results do not depend on thread
 * scheduling. Scaling (if enabled) is fitted on the training part only.
 * Samplers only ever see training rows. Folds whose sampler returns nothing
 * are reported as failed and left out of the aggregates.
 */
inline EvalReport cross_validate(const Dataset& input, const EvalConfig& cfg) {
    cfg.validate();
    EvalReport rep;
    rep.config = cfg;

    Dataset data = input;
    if (cfg.noise_ratio > 0.0) {
        RngStream noise_rng(RngStream::derive_seed(cfg.seed, 0, 0));
        auto [noisy, spec] = inject_class_noise(input, cfg.noise_ratio, noise_rng);
        data = std::move(noisy);
        rep.noise_flipped = spec.flipped_ids.size();
    }
    rep.summary = summarize(data);

    std::vector<FoldAssignment> splits;
    for (std::size_t r = 0; r < cfg.repeats; ++r) {
        RngStream split_rng(RngStream::derive_seed(cfg.seed, r + 1, 0));
        splits.push_back(stratified_folds(data, cfg.folds, split_rng));
        rep.stratified = rep.stratified && splits.back().stratified;
    }

    const std::size_t total = cfg.folds * cfg.repeats;
    rep.folds.resize(total);
    std::size_t workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, total);
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    auto work = [&](std::size_t w) {
        try {
            for (std::size_t i = next++; i < total; i = next++) {
                const std::size_t r = i / cfg.folds;
                const std::size_t f = i % cfg.folds;
                rep.folds[i] = detail::run_fold(data, splits[r], r, f, cfg);
            }
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(work, w);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }

    std::vector<double> acc, gm, sr, gms, sms, tms, pms;
    for (const auto& fr : rep.folds) {
        rep.leakage_audit_passed = rep.leakage_audit_passed && fr.leakage_ok;
        if (fr.failed) {
            ++rep.failed_folds;
            continue;
        }
        acc.push_back(fr.metrics.accuracy);
        gm.push_back(fr.metrics.gmean);
        sr.push_back(fr.metrics.sampling_ratio);
        gms.push_back(fr.metrics.granulation_ms);
        sms.push_back(fr.metrics.sampling_ms);
        tms.push_back(fr.metrics.train_ms);
        pms.push_back(fr.metrics.predict_ms);
    }
    rep.accuracy = aggregate(acc);
    rep.gmean = aggregate(gm);
    rep.sampling_ratio = aggregate(sr);
    rep.granulation_ms = aggregate(gms);
    rep.sampling_ms = aggregate(sms);
    rep.train_ms = aggregate(tms);
    rep.predict_ms = aggregate(pms);
    return rep;
}

} // namespace granule
