#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "granule/core.hpp"
#include "granule/eval.hpp"
#include "granule/gbabs.hpp"
#include "granule/harness.hpp"
#include "granule/rdgbg.hpp"

/**
 * @file io.hpp
 * @brief CSV ingestion and deterministic CSV/JSON exports.
 *
 * JSON documents carry `"format_version": 1`, use sorted keys and round every
 * real to 12 significant digits, so equal inputs give byte-identical files.
 */

namespace granule {

inline constexpr int kFormatVersion = 1;

/// Malformed input file; `row` and `column` are 1-based (0 when not applicable).
class parse_error : public usage_error {
public:
    parse_error(const std::string& what, std::size_t row, std::size_t column)
        : usage_error(what + " (row " + std::to_string(row) + ", column " + std::to_string(column) + ")"),
          row_(row), column_(column) {}
    std::size_t row() const { return row_; }
    std::size_t column() const { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

struct CsvSchema {
    char delimiter = ',';
    bool has_header = true;
    // monostate: last column
    std::variant<std::monostate, std::size_t, std::string> label_column;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split_row(std::string_view line, char delim) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell.push_back('"');
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cell.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == delim) {
            out.emplace_back(trim(cell));
            cell.clear();
        } else {
            cell.push_back(ch);
        }
    }
    out.emplace_back(trim(cell));
    return out;
}

inline bool parse_real(std::string_view s, double& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

inline std::string format_real(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline std::string csv_cell(const std::string& s, char delim) {
    if (s.find(delim) == std::string::npos && s.find('"') == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out.push_back('"');
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

/// Rounds to 12 significant digits.
inline double round12(double v) {
    if (!std::isfinite(v)) {
        return v;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::strtod(buf, nullptr);
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw usage_error("cannot open '" + path + "' for writing");
    }
    return out;
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

} // namespace detail

/**
 * Loads a numeric CSV. Rows become samples in file order, raw labels map to
 * class ids in order of first appearance.
 */
inline Dataset load_csv(const std::string& path, const CsvSchema& schema = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw usage_error("cannot open '" + path + "'");
    }
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_no;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (detail::trim(line).empty()) {
            continue;
        }
        rows.push_back(detail::split_row(line, schema.delimiter));
        line_no.push_back(n);
    }
    std::vector<std::string> header;
    if (schema.has_header && !rows.empty()) {
        header = std::move(rows.front());
        rows.erase(rows.begin());
        line_no.erase(line_no.begin());
    }
    if (rows.empty()) {
        throw usage_error("'" + path + "' contains no data rows");
    }
    const std::size_t width = header.empty() ? rows.front().size() : header.size();
    if (width < 2) {
        throw parse_error("need at least one feature column and a label column", line_no.front(), 0);
    }

    std::size_t label_col = width - 1;
    if (const auto* idx = std::get_if<std::size_t>(&schema.label_column)) {
        if (*idx >= width) {
            throw usage_error("label column index " + std::to_string(*idx) + " out of range");
        }
        label_col = *idx;
    } else if (const auto* name = std::get_if<std::string>(&schema.label_column)) {
        const auto it = std::find(header.begin(), header.end(), *name);
        if (it == header.end()) {
            throw usage_error("label column '" + *name + "' not found in header");
        }
        label_col = static_cast<std::size_t>(it - header.begin());
    }

    const std::size_t p = width - 1;
    std::vector<double> features;
    features.reserve(rows.size() * p);
    std::vector<ClassId> labels;
    labels.reserve(rows.size());
    std::vector<std::string> label_names;
    std::map<std::string, ClassId> label_ids;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != width) {
            throw parse_error("expected " + std::to_string(width) + " cells, found " + std::to_string(row.size()),
                              line_no[r], 0);
        }
        for (std::size_t c = 0; c < width; ++c) {
            if (c == label_col) {
                continue;
            }
            double v = 0.0;
            if (!detail::parse_real(row[c], v)) {
                throw parse_error("non-numeric feature value '" + row[c] + "' (categorical features must be encoded first)",
                                  line_no[r], c + 1);
            }
            features.push_back(v);
        }
        const auto [it, inserted] = label_ids.try_emplace(row[label_col], static_cast<ClassId>(label_names.size()));
        if (inserted) {
            label_names.push_back(row[label_col]);
        }
        labels.push_back(it->second);
    }

    std::vector<std::string> feature_names;
    std::string label_name = "class";
    if (!header.empty()) {
        for (std::size_t c = 0; c < width; ++c) {
            if (c == label_col) {
                label_name = header[c];
            } else {
                feature_names.push_back(header[c]);
            }
        }
    }
    return Dataset(std::move(features), std::move(labels), p, std::move(label_names), std::move(feature_names),
                   std::move(label_name), label_col);
}

/// Writes the rows `ids` in ascending id order, with header and raw label strings.
inline void save_subset_csv(const Dataset& data, std::span<const SampleId> ids, const std::string& path, char delim = ',') {
    std::vector<SampleId> sorted(ids.begin(), ids.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    const std::size_t p = data.num_features();
    const std::size_t lp = data.label_position();

    auto out = detail::open_out(path);
    auto emit = [&](auto&& cell_at) {
        for (std::size_t c = 0; c <= p; ++c) {
            if (c) out << delim;
            out << cell_at(c);
        }
        out << '\n';
    };
    emit([&](std::size_t c) {
        if (c == lp) return detail::csv_cell(data.label_name(), delim);
        const std::size_t f = c < lp ? c : c - 1;
        return detail::csv_cell(data.feature_names().empty() ? "x" + std::to_string(f) : data.feature_names()[f], delim);
    });
    for (SampleId id : sorted) {
        if (id >= data.size()) {
            throw usage_error("subset id " + std::to_string(id) + " out of range");
        }
        emit([&](std::size_t c) {
            if (c == lp) return detail::csv_cell(data.label_names()[static_cast<std::size_t>(data.label(id))], delim);
            return detail::format_real(data.feature(id, c < lp ? c : c - 1));
        });
    }
}

inline void save_csv(const Dataset& data, const std::string& path) {
    std::vector<SampleId> all(data.size());
    std::iota(all.begin(), all.end(), SampleId{0});
    save_subset_csv(data, all, path);
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline nlohmann::json reals(std::span<const double> v) {
    auto j = nlohmann::json::array();
    for (double x : v) j.push_back(round12(x));
    return j;
}

inline nlohmann::json metrics_json(const Metrics& m, bool timings) {
    nlohmann::json j = {
        {"accuracy", round12(m.accuracy)},
        {"gmean", round12(m.gmean)},
        {"sampling_ratio", round12(m.sampling_ratio)},
    };
    if (timings) {
        j["granulation_ms"] = round12(m.granulation_ms);
        j["sampling_ms"] = round12(m.sampling_ms);
        j["train_ms"] = round12(m.train_ms);
        j["predict_ms"] = round12(m.predict_ms);
    }
    return j;
}

inline nlohmann::json aggregate_json(const Aggregate& a) {
    return {{"mean", round12(a.mean)}, {"stddev", round12(a.stddev)}};
}

} // namespace detail

inline nlohmann::json balls_to_json(const GranulationResult& res) {
    auto balls = nlohmann::json::array();
    for (const auto& b : res.balls) {
        balls.push_back({
            {"ball_id", b.ball_id},
            {"center_id", b.center_id},
            {"center", detail::reals(b.center)},
            {"radius", detail::round12(b.radius)},
            {"label", b.label},
            {"member_ids", b.member_ids},
            {"kind", to_string(b.kind)},
        });
    }
    return {
        {"format_version", kFormatVersion},
        {"balls", balls},
        {"noise_ids", res.noise_ids},
        {"low_density_ids", res.low_density_ids},
        {"rho", res.rho},
        {"seed", res.seed},
        {"iterations", res.iterations},
    };
}

inline GranulationResult balls_from_json(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != kFormatVersion) {
        throw usage_error("unsupported ball-set format_version");
    }
    GranulationResult res;
    for (const auto& jb : j.at("balls")) {
        GranularBall b;
        b.ball_id = jb.at("ball_id").get<std::size_t>();
        b.center_id = jb.at("center_id").get<SampleId>();
        b.center = jb.at("center").get<std::vector<double>>();
        b.radius = jb.at("radius").get<double>();
        b.label = jb.at("label").get<ClassId>();
        b.member_ids = jb.at("member_ids").get<std::vector<SampleId>>();
        const auto kind = jb.at("kind").get<std::string>();
        b.kind = kind == "regular"              ? BallKind::regular
                 : kind == "orphan_low_density" ? BallKind::orphan_low_density
                                                : BallKind::orphan_undivided;
        res.balls.push_back(std::move(b));
    }
    res.noise_ids = j.at("noise_ids").get<std::vector<SampleId>>();
    res.low_density_ids = j.at("low_density_ids").get<std::vector<SampleId>>();
    res.rho = j.at("rho").get<int>();
    res.seed = j.at("seed").get<std::uint64_t>();
    res.iterations = j.at("iterations").get<std::size_t>();
    return res;
}

inline void export_balls_json(const GranulationResult& res, const std::string& path) {
    detail::write_json(balls_to_json(res), path);
}

/// Selected ids plus per-dimension pair provenance.
inline nlohmann::json sample_to_json(const SampledDataset& s) {
    auto pairs = nlohmann::json::array();
    for (const auto& p : s.pairs) {
        pairs.push_back({{"dim", p.dim},
                         {"left_ball", p.left_ball},
                         {"right_ball", p.right_ball},
                         {"left_sample", p.left_sample},
                         {"right_sample", p.right_sample}});
    }
    return {{"format_version", kFormatVersion},
            {"sample_ids", s.sample_ids},
            {"pairs", pairs},
            {"source_n", s.source_n},
            {"ratio", detail::round12(s.ratio)}};
}

/**
 * Timings are wall-clock and differ between runs; they are only written when
 * `timings` is set so that default reports stay byte-reproducible.
 */
inline nlohmann::json report_to_json(const EvalReport& rep, bool timings = false) {
    const auto& c = rep.config;
    nlohmann::json config = {
        {"classifier", to_string(c.classifier)},
        {"k", c.k},
        {"folds", c.folds},
        {"repeats", c.repeats},
        {"sampler", to_string(c.sampler)},
        {"rho", c.rho},
        {"noise_ratio", detail::round12(c.noise_ratio)},
        {"seed", c.seed},
        {"normalize", c.normalize},
    };
    nlohmann::json summary = {
        {"n_samples", rep.summary.n_samples},
        {"n_features", rep.summary.n_features},
        {"n_classes", rep.summary.n_classes},
        {"class_counts", rep.summary.class_counts},
        {"imbalance_ratio", detail::round12(rep.summary.imbalance_ratio)},
    };
    auto folds = nlohmann::json::array();
    for (const auto& f : rep.folds) {
        folds.push_back({
            {"repeat", f.repeat},
            {"fold", f.fold},
            {"train_size", f.train_size},
            {"test_size", f.test_size},
            {"sampled_size", f.sampled_size},
            {"gbabs_size", f.gbabs_size},
            {"failed", f.failed},
            {"diagnostic", f.diagnostic},
            {"leakage_ok", f.leakage_ok},
            {"metrics", detail::metrics_json(f.metrics, timings)},
        });
    }
    nlohmann::json agg = {
        {"accuracy", detail::aggregate_json(rep.accuracy)},
        {"gmean", detail::aggregate_json(rep.gmean)},
        {"sampling_ratio", detail::aggregate_json(rep.sampling_ratio)},
    };
    if (timings) {
        agg["granulation_ms"] = detail::aggregate_json(rep.granulation_ms);
        agg["sampling_ms"] = detail::aggregate_json(rep.sampling_ms);
        agg["train_ms"] = detail::aggregate_json(rep.train_ms);
        agg["predict_ms"] = detail::aggregate_json(rep.predict_ms);
    }
    return {
        {"format_version", kFormatVersion},
        {"config", config},
        {"dataset", summary},
        {"stratified", rep.stratified},
        {"noise_flipped", rep.noise_flipped},
        {"folds", folds},
        {"failed_folds", rep.failed_folds},
        {"leakage_audit_passed", rep.leakage_audit_passed},
        {"aggregate", agg},
    };
}

inline void export_report_json(const EvalReport& rep, const std::string& path, bool timings = false) {
    detail::write_json(report_to_json(rep, timings), path);
}

inline void export_noise_json(const NoiseSpec& spec, const std::string& path) {
    detail::write_json({{"format_version", kFormatVersion},
                        {"ratio", detail::round12(spec.ratio)},
                        {"seed", spec.seed},
                        {"flipped_ids", spec.flipped_ids}},
                       path);
}

struct FigurePoint {
    std::string group;
    double x = 0.0;
    double y = 0.0;
};

/// Tidy `group,x,y` rows in input order.
inline void export_figure_data_csv(std::span<const FigurePoint> series, const std::string& path) {
    auto out = detail::open_out(path);
    out << "group,x,y\n";
    for (const auto& pt : series) {
        out << detail::csv_cell(pt.group, ',') << ',' << detail::format_real(detail::round12(pt.x)) << ','
            << detail::format_real(detail::round12(pt.y)) << '\n';
    }
}

} // namespace granule
