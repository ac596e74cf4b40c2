// granule: command-line frontend for granulation, sampling, noise injection and evaluation.
//
// Exit codes: 0 success, 2 usage or input error, 3 internal invariant violation.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "granule/granule.hpp"

using namespace granule;
namespace fs = std::filesystem;

namespace {

struct Options {
    std::vector<std::string> inputs;
    std::string label_column;
    int rho = 5;
    std::uint64_t seed = 42;
    bool normalize = true;
    std::string out;

    // sample
    std::string method = "gbabs";
    double ratio = -1.0;
    bool match_gbabs = false;

    // noise
    std::string flips_out;

    // eval and sweep
    std::string sampler = "none";
    std::string classifier = "dt";
    std::size_t k = 5;
    std::size_t folds = 5;
    std::size_t repeats = 5;
    double noise = 0.0;
    std::size_t threads = 0;
    bool timings = false;
    std::string rho_list;
    std::string noise_list;
};

std::string resolve(const std::string& path) {
    const char* dir = std::getenv("GRANULE_DATA_DIR");
    if (dir && *dir && fs::path(path).is_relative() && !fs::exists(path)) {
        return (fs::path(dir) / path).string();
    }
    return path;
}

Dataset load(const Options& o, const std::string& input) {
    CsvSchema schema;
    if (!o.label_column.empty()) {
        const bool numeric = o.label_column.find_first_not_of("0123456789") == std::string::npos;
        if (numeric) {
            schema.label_column = static_cast<std::size_t>(std::stoul(o.label_column));
        } else {
            schema.label_column = o.label_column;
        }
    }
    return load_csv(resolve(input), schema);
}

const std::string& single_input(const Options& o) {
    if (o.inputs.size() != 1) {
        throw usage_error("this subcommand takes exactly one --input");
    }
    return o.inputs.front();
}

SamplerKind parse_sampler(const std::string& s) {
    if (s == "none") return SamplerKind::none;
    if (s == "gbabs") return SamplerKind::gbabs;
    if (s == "srs") return SamplerKind::srs;
    throw usage_error("unknown sampler '" + s + "'");
}

ClassifierKind parse_classifier(const std::string& s) {
    if (s == "knn") return ClassifierKind::knn;
    if (s == "dt") return ClassifierKind::dt;
    throw usage_error("unknown classifier '" + s + "'");
}

/// Comma-separated values; an item `a..b` or `a..b:step` expands to an inclusive range.
std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    auto number = [](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size()) {
            throw usage_error("bad list value '" + s + "'");
        }
        return v;
    };
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto dots = item.find("..");
        if (dots == std::string::npos) {
            out.push_back(number(item));
            continue;
        }
        const auto colon = item.find(':', dots);
        const double a = number(item.substr(0, dots));
        const double b = number(item.substr(dots + 2, colon == std::string::npos ? std::string::npos : colon - dots - 2));
        const double step = colon == std::string::npos ? 1.0 : number(item.substr(colon + 1));
        if (!(step > 0) || b < a) {
            throw usage_error("bad range '" + item + "'");
        }
        for (double v = a; v <= b + 1e-9 * step; v += step) {
            out.push_back(v);
        }
    }
    if (out.empty()) {
        throw usage_error("empty list");
    }
    return out;
}

Dataset prepared(const Options& o, const Dataset& d) {
    return o.normalize ? normalize_min_max(d) : d;
}

int cmd_summarize(const Options& o) {
    const auto s = summarize(load(o, single_input(o)));
    std::cout << "samples " << s.n_samples << "\nfeatures " << s.n_features << "\nclasses " << s.n_classes
              << "\nclass_counts";
    for (auto c : s.class_counts) std::cout << ' ' << c;
    std::cout << "\nimbalance_ratio " << s.imbalance_ratio << "\n";
    return 0;
}

int cmd_balls(const Options& o) {
    const auto d = load(o, single_input(o));
    RngStream rng(o.seed);
    const auto res = run_rdgbg(prepared(o, d), o.rho, rng);
    if (!o.out.empty()) {
        export_balls_json(res, o.out);
    }
    std::cout << "balls " << res.balls.size() << "\nnoise " << res.noise_ids.size() << "\niterations "
              << res.iterations << "\n";
    return 0;
}

int cmd_sample(const Options& o) {
    const auto d = load(o, single_input(o));
    const auto x = prepared(o, d);
    std::vector<SampleId> ids;
    if (o.method == "gbabs") {
        RngStream rng(o.seed);
        ids = run_gbabs(x, o.rho, rng).first.sample_ids;
        if (ids.empty()) {
            std::cerr << "warning: no borderline samples (fewer than two classes survived granulation)\n";
        }
    } else if (o.method == "srs") {
        double ratio = o.ratio;
        if (o.match_gbabs) {
            RngStream rng(o.seed);
            ratio = run_gbabs(x, o.rho, rng).first.ratio;
        } else if (ratio < 0.0) {
            throw usage_error("srs needs --ratio or --match-gbabs");
        }
        RngStream rng(RngStream::derive_seed(o.seed, 0, 1));
        ids = srs_sample(d, ratio, rng);
    } else {
        throw usage_error("unknown method '" + o.method + "'");
    }
    save_subset_csv(d, ids, o.out);
    std::cout << "sampled " << ids.size() << " of " << d.size() << "\nratio "
              << static_cast<double>(ids.size()) / static_cast<double>(d.size()) << "\n";
    return 0;
}

int cmd_noise(const Options& o) {
    const auto d = load(o, single_input(o));
    RngStream rng(o.seed);
    const auto [noisy, spec] = inject_class_noise(d, o.ratio < 0.0 ? 0.0 : o.ratio, rng);
    save_csv(noisy, o.out);
    const std::string flips = o.flips_out.empty() ? fs::path(o.out).replace_extension(".flips.json").string() : o.flips_out;
    export_noise_json(spec, flips);
    std::cout << "flipped " << spec.flipped_ids.size() << " of " << d.size() << "\nflips " << flips << "\n";
    return 0;
}

EvalConfig eval_config(const Options& o) {
    EvalConfig cfg;
    cfg.classifier = parse_classifier(o.classifier);
    cfg.sampler = parse_sampler(o.sampler);
    cfg.k = o.k;
    cfg.folds = o.folds;
    cfg.repeats = o.repeats;
    cfg.rho = o.rho;
    cfg.noise_ratio = o.noise;
    cfg.seed = o.seed;
    cfg.normalize = o.normalize;
    cfg.threads = o.threads;
    cfg.validate();
    return cfg;
}

int cmd_eval(const Options& o) {
    const auto cfg = eval_config(o);
    const auto rep = cross_validate(load(o, single_input(o)), cfg);
    if (!o.out.empty()) {
        export_report_json(rep, o.out, o.timings);
    }
    std::cout << "accuracy " << rep.accuracy.mean << " +- " << rep.accuracy.stddev << "\ngmean " << rep.gmean.mean
              << " +- " << rep.gmean.stddev << "\nsampling_ratio " << rep.sampling_ratio.mean << "\nfailed_folds "
              << rep.failed_folds << "\nleakage_audit " << (rep.leakage_audit_passed ? "ok" : "FAILED") << "\n";
    if (!rep.stratified) {
        std::cerr << "warning: a class has fewer members than folds; folds are not stratified\n";
    }
    if (!rep.leakage_audit_passed) {
        throw invariant_error("leakage audit failed");
    }
    return 0;
}

int cmd_sweep(const Options& o) {
    if (o.rho_list.empty() == o.noise_list.empty()) {
        throw usage_error("give exactly one of --rho-list and --noise-list");
    }
    const bool by_rho = !o.rho_list.empty();
    const auto values = parse_list(by_rho ? o.rho_list : o.noise_list);
    const auto cfg = by_rho ? EvalConfig{} : eval_config(o);
    if (o.inputs.empty()) {
        throw usage_error("no --input given");
    }
    std::vector<FigurePoint> rows;
    for (const auto& input : o.inputs) {
        const auto d = load(o, input);
        const auto x = prepared(o, d);
        const std::string stem = fs::path(input).stem().string();
        for (double v : values) {
            if (by_rho) {
                const int rho = static_cast<int>(std::lround(v));
                RngStream rng(o.seed);
                rows.push_back({stem, static_cast<double>(rho), run_gbabs(x, rho, rng).first.ratio});
            } else {
                auto c = cfg;
                c.noise_ratio = v;
                const auto rep = cross_validate(d, c);
                rows.push_back({stem + "/" + o.sampler + "-" + o.classifier, v, rep.accuracy.mean});
            }
            std::cout << rows.back().group << ' ' << rows.back().x << ' ' << rows.back().y << "\n";
        }
    }
    export_figure_data_csv(rows, o.out);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"granule: granular-ball borderline sampling toolkit"};
    app.set_config("--config", "", "TOML-style file of option values (flags on the command line win)");
    app.require_subcommand(1);
    Options o;

    auto input = [&](CLI::App* s, bool many = false) {
        auto* opt = s->add_option("--input", o.inputs, "CSV file; relative paths fall back to $GRANULE_DATA_DIR");
        opt->required();
        if (!many) opt->expected(1);
        s->add_option("--label-column", o.label_column, "label column name or 0-based index (default: last)");
    };
    auto seed = [&](CLI::App* s) { s->add_option("--seed", o.seed, "master seed")->capture_default_str(); };
    auto rho = [&](CLI::App* s) {
        s->add_option("--rho", o.rho, "density tolerance")->capture_default_str()->check(CLI::Range(2, 1 << 20));
    };
    auto normalize = [&](CLI::App* s) {
        s->add_flag("--normalize,!--no-normalize", o.normalize, "min-max scale features first")->default_str("true");
    };
    auto eval_opts = [&](CLI::App* s) {
        s->add_option("--sampler", o.sampler, "none|gbabs|srs")->capture_default_str();
        s->add_option("--classifier", o.classifier, "knn|dt")->capture_default_str();
        s->add_option("--k", o.k, "neighbours for knn")->capture_default_str();
        s->add_option("--folds", o.folds)->capture_default_str();
        s->add_option("--repeats", o.repeats)->capture_default_str();
        s->add_option("--threads", o.threads, "worker threads, 0 = hardware")->capture_default_str();
    };

    auto* summ = app.add_subcommand("summarize", "print dataset size, classes and imbalance ratio");
    input(summ);

    auto* balls = app.add_subcommand("balls", "granulate and write the ball set as JSON");
    input(balls);
    rho(balls);
    seed(balls);
    normalize(balls);
    balls->add_option("--out-balls,--out", o.out, "ball-set JSON path");

    auto* sample = app.add_subcommand("sample", "write a sampled subset CSV");
    input(sample);
    rho(sample);
    seed(sample);
    normalize(sample);
    sample->add_option("--method", o.method, "gbabs|srs")->capture_default_str();
    sample->add_option("--ratio", o.ratio, "srs sampling ratio")->check(CLI::Range(0.0, 1.0));
    sample->add_flag("--match-gbabs", o.match_gbabs, "srs at the ratio GBABS realizes on this input");
    sample->add_option("--out", o.out, "subset CSV path")->required();

    auto* noise = app.add_subcommand("noise", "flip a fraction of labels");
    input(noise);
    seed(noise);
    noise->add_option("--ratio", o.ratio, "fraction of labels to flip")->required()->check(CLI::Range(0.0, 1.0));
    noise->add_option("--out", o.out, "noisy CSV path")->required();
    noise->add_option("--flips-out", o.flips_out, "flipped-id JSON path (default: <out>.flips.json)");

    auto* eval = app.add_subcommand("eval", "repeated k-fold cross-validation");
    input(eval);
    rho(eval);
    seed(eval);
    normalize(eval);
    eval_opts(eval);
    eval->add_option("--noise", o.noise, "label noise ratio injected before splitting")->capture_default_str();
    eval->add_option("--report,--out", o.out, "report JSON path");
    eval->add_flag("--timings", o.timings, "include wall-clock timings in the report");

    auto* sweep = app.add_subcommand("sweep", "ratio-vs-rho or accuracy-vs-noise figure data");
    input(sweep, true);
    seed(sweep);
    rho(sweep);
    normalize(sweep);
    eval_opts(sweep);
    sweep->add_option("--rho-list", o.rho_list, "e.g. 3..19:2");
    sweep->add_option("--noise-list", o.noise_list, "e.g. 0,0.05,0.1,0.2,0.3,0.4");
    sweep->add_option("--out-csv,--out", o.out, "tidy group,x,y CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    std::cout << "# effective configuration\n";
    std::istringstream echo(app.get_subcommands().front()->config_to_str(true, false));
    for (std::string line; std::getline(echo, line);) {
        if (!line.empty()) std::cout << "# " << line << "\n";
    }

    try {
        if (*summ) return cmd_summarize(o);
        if (*balls) return cmd_balls(o);
        if (*sample) return cmd_sample(o);
        if (*noise) return cmd_noise(o);
        if (*eval) return cmd_eval(o);
        if (*sweep) return cmd_sweep(o);
    } catch (const usage_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const invariant_error& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
