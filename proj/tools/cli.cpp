#include "cli.hpp"

#include "mlm/evaluation.hpp"
#include "mlm/io.hpp"
#include "mlm/prediction.hpp"
#include "mlm/refselect.hpp"
#include "mlm/serialization.hpp"
#include "mlm/training.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace mlm::cli {
namespace {

/// Validation failure that should exit with kExitUsage.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct LoadedData {
    Dataset data;
    std::vector<std::string> input_names;
    std::vector<std::string> output_names;
};

LoadedData load_dataset(const std::string& path, Index targets) {
    const Table t = read_csv(path);
    const auto cols = static_cast<Index>(t.header.size());
    if (targets < 1) throw UsageError("--targets must be at least 1");
    if (cols < targets + 1)
        throw UsageError("'" + path + "' has " + std::to_string(cols) + " columns; need at least " +
                         std::to_string(targets + 1) + " (inputs plus " + std::to_string(targets) + " targets)");
    if (t.values.rows() < 1) throw UsageError("'" + path + "' has no data rows");
    const Index p = cols - targets;
    LoadedData ld;
    ld.data = Dataset(t.values.leftCols(p), t.values.rightCols(targets));
    ld.input_names.assign(t.header.begin(), t.header.begin() + p);
    ld.output_names.assign(t.header.begin() + p, t.header.end());
    return ld;
}

Index resolve_k(const std::optional<Index>& k, const std::optional<double>& krel, Index n) {
    if (k) {
        if (*k < 1 || *k > n) throw UsageError("K must be in [1, N] (N = " + std::to_string(n) + ")");
        return *k;
    }
    const double kr = krel.value_or(100.0);
    if (!(kr > 0.0 && kr <= 100.0)) throw UsageError("K_rel must be in (0, 100]");
    return krel_to_k(kr, n);
}

Method method_arg(const std::string& name) {
    try {
        return parse_method(name);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

// ---------------------------------------------------------------------------

struct FitArgs {
    std::string data;
    std::string out;
    std::string method = "rs_maximin";
    std::optional<Index> k;
    std::optional<double> krel;
    std::uint64_t seed = 0;
    Index targets = 1;
    double ridge = 0.0;
};

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
    const Method method = method_arg(a.method);
    const LoadedData ld = load_dataset(a.data, a.targets);
    const Index n = ld.data.size();
    const Index k = resolve_k(a.k, a.krel, n);

    const MinMaxScaler sx = MinMaxScaler::fit(ld.data.inputs);
    const MinMaxScaler sy = MinMaxScaler::fit(ld.data.outputs);
    const Dataset scaled(sx.apply(ld.data.inputs), sy.apply(ld.data.outputs));
    std::vector<Index> idx = select(scaled.inputs, {method, k, a.seed});
    MlmModel model = fit(scaled, ReferenceSet::from_indices(scaled, std::move(idx)), {a.ridge});
    model.input_scaler = sx;
    model.output_scaler = sy;

    ModelMetadata meta{ld.input_names, ld.output_names, std::string(to_string(method)), a.seed, n};
    save_model(a.out, model, meta);
    for (const auto& w : model.warnings) err << "warning: " << w << "\n";
    out << "K=" << k << "\n"
        << "K_rel=" << format_double(100.0 * static_cast<double>(k) / static_cast<double>(n)) << "\n"
        << "residual=" << format_double(model.fit_residual_norm) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
    std::string model;
    std::string inputs;
    std::string out;
    std::string ban = "fixed:0";
};

int cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream&) {
    ModelMetadata meta;
    const MlmModel model = load_model(a.model, &meta);
    BanPolicy policy;
    try {
        policy = parse_ban_policy(a.ban);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const std::string text = read_text(a.inputs);
    std::string result;
    if (!detail::trim(text).empty()) {
        const Table t = parse_csv(text);
        const Index cols = static_cast<Index>(t.header.size());
        const Index p = model.input_dim();
        if (cols != p && cols != p + model.output_dim())
            throw UsageError("inputs have " + std::to_string(cols) + " columns; the model expects " +
                             std::to_string(p) + " (or " + std::to_string(p + model.output_dim()) +
                             " with trailing targets)");
        Table preds;
        preds.header = meta.output_names;
        if (static_cast<Index>(preds.header.size()) != model.output_dim()) {
            preds.header.clear();
            for (Index j = 0; j < model.output_dim(); ++j) preds.header.push_back("y" + std::to_string(j + 1));
        }
        preds.values = t.values.rows() > 0 ? predict_original_units(model, t.values.leftCols(p), policy)
                                           : Matrix(0, model.output_dim());
        result = to_csv(preds);
    }
    if (a.out.empty() || a.out == "-") {
        out << result;
    } else {
        write_text(a.out, result);
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct SelectArgs {
    std::string data;
    std::string method = "rs_maximin";
    std::optional<Index> k;
    std::optional<double> krel;
    std::uint64_t seed = 0;
    Index targets = 1;
    std::size_t profile = 0;
};

int cmd_select_refs(const SelectArgs& a, std::ostream& out, std::ostream&) {
    const Method method = method_arg(a.method);
    const LoadedData ld = load_dataset(a.data, a.targets);
    const Index k = resolve_k(a.k, a.krel, ld.data.size());
    const Matrix x = MinMaxScaler::fit(ld.data.inputs).apply(ld.data.inputs);
    const std::vector<Index> idx = select(x, {method, k, a.seed});
    const std::size_t pairs = idx.size() * (idx.size() - 1) / 2;
    if (a.profile > pairs)
        throw UsageError("--profile " + std::to_string(a.profile) + " exceeds K(K-1)/2 = " + std::to_string(pairs));

    out << "# method=" << to_string(method) << " k=" << k << " seed=" << a.seed << "\n";
    out << "indices";
    for (Index i : idx) out << ' ' << i;
    out << "\n";
    if (a.profile > 0) {
        out << "profile";
        for (double d : pairwise_separation_profile(x, idx, a.profile)) out << ' ' << format_double(d);
        out << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct GenS1Args {
    Index n = 1000;
    std::uint64_t seed = 0;
    std::string out;
    std::string points;
};

int cmd_gen_s1(const GenS1Args& a, std::ostream& out, std::ostream&) {
    if (a.n < 1) throw UsageError("--n must be positive");
    const Dataset d = a.points.empty() ? gen_s1_synthetic(a.n, a.seed)
                                       : gen_s1_synthetic(a.n, a.seed, parse_points(read_text(a.points)));
    Table t;
    t.header = {"x1", "x2", "y"};
    t.values.resize(d.size(), 3);
    t.values << d.inputs, d.outputs;
    if (a.out.empty() || a.out == "-") {
        out << to_csv(t);
    } else {
        write_csv(a.out, t);
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// Benchmark config

inline constexpr const char* kConfigSchema = "mlm-benchmark/1";

struct DatasetEntry {
    std::string id;
    std::string csv;
    Index targets = 1;
    std::optional<Index> s1_n;
    std::uint64_t s1_seed = 0;
    std::string s1_points;
};

struct BenchmarkConfig {
    ProtocolConfig protocol;
    std::string output_dir = ".";
    bool include_timing = true;
    std::vector<DatasetEntry> datasets;
};

[[noreturn]] void config_error(const std::string& pointer, const std::string& what) {
    throw UsageError("config: " + (pointer.empty() ? std::string("/") : pointer) + ": " + what);
}

void check_keys(const Json& obj, const std::string& pointer, const std::set<std::string>& allowed) {
    if (!obj.is_object()) config_error(pointer, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) config_error(pointer + "/" + it.key(), "unknown key");
}

template <typename T>
T get_as(const Json& obj, const std::string& key, const std::string& pointer) {
    try {
        return obj.at(key).get<T>();
    } catch (const Json::exception&) {
        config_error(pointer + "/" + key, "missing or wrong type");
    }
}

BenchmarkConfig parse_benchmark_config(const Json& j, const std::filesystem::path& base_dir) {
    check_keys(j, "", {"schema", "root_seed", "methods", "krel_grid", "outer_folds", "inner_folds", "ban_policy",
                       "threads", "record_train_rmse", "parsimony_tol", "output_dir", "include_timing",
                       "datasets"});
    if (!j.contains("schema") || get_as<std::string>(j, "schema", "") != kConfigSchema)
        config_error("/schema", std::string("must be \"") + kConfigSchema + "\"");

    BenchmarkConfig c;
    auto& p = c.protocol;
    if (j.contains("root_seed")) p.root_seed = get_as<std::uint64_t>(j, "root_seed", "");
    if (j.contains("methods")) {
        const auto names = get_as<std::vector<std::string>>(j, "methods", "");
        if (names.empty()) config_error("/methods", "must not be empty");
        p.methods.clear();
        for (std::size_t i = 0; i < names.size(); ++i) {
            try {
                p.methods.push_back(parse_method(names[i]));
            } catch (const std::invalid_argument&) {
                config_error("/methods/" + std::to_string(i), "unknown method '" + names[i] + "'");
            }
        }
    }
    if (j.contains("krel_grid")) {
        p.krel_grid = get_as<std::vector<double>>(j, "krel_grid", "");
        if (p.krel_grid.empty()) config_error("/krel_grid", "must not be empty");
        for (std::size_t i = 0; i < p.krel_grid.size(); ++i)
            if (!(p.krel_grid[i] > 0.0 && p.krel_grid[i] <= 100.0))
                config_error("/krel_grid/" + std::to_string(i), "K_rel must be in (0, 100]");
    }
    if (j.contains("outer_folds")) p.outer_folds = get_as<Index>(j, "outer_folds", "");
    if (j.contains("inner_folds")) p.inner_folds = get_as<Index>(j, "inner_folds", "");
    if (p.outer_folds < 2) config_error("/outer_folds", "must be >= 2");
    if (p.inner_folds < 2) config_error("/inner_folds", "must be >= 2");
    if (j.contains("ban_policy")) {
        try {
            p.ban = parse_ban_policy(get_as<std::string>(j, "ban_policy", ""));
        } catch (const std::invalid_argument& e) {
            config_error("/ban_policy", e.what());
        }
    }
    if (j.contains("threads")) p.threads = get_as<unsigned>(j, "threads", "");
    if (j.contains("record_train_rmse")) p.record_train_rmse = get_as<bool>(j, "record_train_rmse", "");
    if (j.contains("parsimony_tol")) p.parsimony_tol = get_as<double>(j, "parsimony_tol", "");
    if (p.parsimony_tol < 0.0) config_error("/parsimony_tol", "must be >= 0");
    if (j.contains("output_dir")) c.output_dir = get_as<std::string>(j, "output_dir", "");
    if (j.contains("include_timing")) c.include_timing = get_as<bool>(j, "include_timing", "");

    if (!j.contains("datasets") || !j["datasets"].is_array() || j["datasets"].empty())
        config_error("/datasets", "must be a non-empty array");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < j["datasets"].size(); ++i) {
        const std::string ptr = "/datasets/" + std::to_string(i);
        const Json& dj = j["datasets"][i];
        check_keys(dj, ptr, {"id", "csv", "targets", "gen_s1"});
        DatasetEntry ds;
        ds.id = get_as<std::string>(dj, "id", ptr);
        if (ds.id.empty() || ds.id.find_first_of("/\\") != std::string::npos)
            config_error(ptr + "/id", "must be a non-empty file-name-safe string");
        if (!ids.insert(ds.id).second) config_error(ptr + "/id", "duplicate id '" + ds.id + "'");
        const bool has_csv = dj.contains("csv"), has_gen = dj.contains("gen_s1");
        if (has_csv == has_gen) config_error(ptr, "exactly one of 'csv' or 'gen_s1' is required");
        if (has_csv) {
            const std::filesystem::path path = get_as<std::string>(dj, "csv", ptr);
            ds.csv = (path.is_absolute() ? path : base_dir / path).string();
            if (dj.contains("targets")) ds.targets = get_as<Index>(dj, "targets", ptr);
            if (ds.targets < 1) config_error(ptr + "/targets", "must be >= 1");
        } else {
            if (dj.contains("targets")) config_error(ptr + "/targets", "only valid with 'csv'");
            const Json& g = dj["gen_s1"];
            check_keys(g, ptr + "/gen_s1", {"n", "seed", "points_file"});
            ds.s1_n = get_as<Index>(g, "n", ptr + "/gen_s1");
            if (*ds.s1_n < 1) config_error(ptr + "/gen_s1/n", "must be positive");
            if (g.contains("seed")) ds.s1_seed = get_as<std::uint64_t>(g, "seed", ptr + "/gen_s1");
            if (g.contains("points_file")) {
                const std::filesystem::path path = get_as<std::string>(g, "points_file", ptr + "/gen_s1");
                ds.s1_points = (path.is_absolute() ? path : base_dir / path).string();
            }
        }
        c.datasets.push_back(std::move(ds));
    }
    return c;
}

int cmd_benchmark(const std::string& config_path, std::ostream& out, std::ostream& err) {
    Json j;
    try {
        j = Json::parse(read_text(config_path));
    } catch (const Json::parse_error& e) {
        throw UsageError(std::string("config: invalid JSON: ") + e.what());
    }
    const auto base_dir = std::filesystem::absolute(config_path).parent_path();
    const BenchmarkConfig cfg = parse_benchmark_config(j, base_dir);
    std::filesystem::path out_dir = cfg.output_dir;
    if (out_dir.is_relative()) out_dir = base_dir / out_dir;
    std::filesystem::create_directories(out_dir);

    for (const auto& ds : cfg.datasets) {
        Dataset data;
        if (ds.s1_n) {
            data = ds.s1_points.empty() ? gen_s1_synthetic(*ds.s1_n, ds.s1_seed)
                                        : gen_s1_synthetic(*ds.s1_n, ds.s1_seed, parse_points(read_text(ds.s1_points)));
        } else {
            data = load_dataset(ds.csv, ds.targets).data;
        }
        err << "running " << ds.id << " (N=" << data.size() << ", P=" << data.input_dim() << ", L="
            << data.output_dim() << ")\n";
        const BenchmarkReport rep = run_protocol(data, cfg.protocol, ds.id);
        const auto json_path = out_dir / (ds.id + ".json");
        const auto csv_path = out_dir / (ds.id + ".csv");
        write_text(json_path.string(), report_to_json(rep, cfg.include_timing).dump(2) + "\n");
        write_text(csv_path.string(), report_to_csv(rep));

        out << ds.id << ": " << rep.cells.size() << " cells, hygiene " << rep.hygiene_assertions << " checks / "
            << rep.hygiene_violations << " violations\n";
        for (const auto& ms : rep.methods) {
            out << "  " << std::left << std::setw(14) << to_string(ms.method) << " chosen K_rel";
            for (double kr : ms.chosen_krel) out << ' ' << format_double(kr);
            out << "  median test RMSE " << format_double(ms.chosen_test_rmse_median) << "\n";
        }
        out << "  wrote " << json_path.string() << " and " << csv_path.string() << "\n";
    }
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Minimal Learning Machine: distance regression with reference point selection", "mlm"};
    app.require_subcommand(1);

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "Scale a CSV dataset, select references, fit and save a model");
    fit_cmd->add_option("data", fit_args.data, "Training CSV (header row, targets rightmost)")->required();
    fit_cmd->add_option("--out", fit_args.out, "Model JSON path")->required();
    fit_cmd->add_option("--method", fit_args.method, "random | rs_kmeanspp | rs_kmedoidspp | rs_upgma | rs_maximin");
    auto* k_opt = fit_cmd->add_option("--k", fit_args.k, "Number of reference points");
    auto* krel_opt = fit_cmd->add_option("--krel", fit_args.krel, "Reference points as a percentage of N");
    k_opt->excludes(krel_opt);
    fit_cmd->add_option("--seed", fit_args.seed, "Seed for the randomized methods");
    fit_cmd->add_option("--targets", fit_args.targets, "Number of rightmost target columns");
    fit_cmd->add_option("--ridge", fit_args.ridge, "Tikhonov weight (0 = ordinary least squares)");

    PredictArgs pred_args;
    auto* pred_cmd = app.add_subcommand("predict", "Predict outputs in original units for a CSV of inputs");
    pred_cmd->add_option("model", pred_args.model, "Model JSON")->required();
    pred_cmd->add_option("inputs", pred_args.inputs, "CSV with P input columns (optionally followed by targets)")
        ->required();
    pred_cmd->add_option("--out", pred_args.out, "Output CSV (default: stdout)");
    pred_cmd->add_option("--ban", pred_args.ban, "fixed:<i> | random:<seed> | best_conditioned");

    SelectArgs sel_args;
    auto* sel_cmd = app.add_subcommand("select-refs", "Print selected reference indices and separation profile");
    sel_cmd->add_option("data", sel_args.data, "CSV dataset")->required();
    sel_cmd->add_option("--method", sel_args.method, "Selection method");
    auto* sk_opt = sel_cmd->add_option("--k", sel_args.k, "Number of reference points");
    auto* skrel_opt = sel_cmd->add_option("--krel", sel_args.krel, "Reference points as a percentage of N");
    sk_opt->excludes(skrel_opt);
    sel_cmd->add_option("--seed", sel_args.seed, "Seed for the randomized methods");
    sel_cmd->add_option("--targets", sel_args.targets, "Number of rightmost target columns");
    sel_cmd->add_option("--profile", sel_args.profile, "Print the m smallest pairwise reference distances");

    std::string config_path;
    auto* bench_cmd = app.add_subcommand("benchmark", "Run the nested cross-validation protocol from a JSON config");
    bench_cmd->add_option("config", config_path, "Benchmark config JSON")->required();

    GenS1Args gen_args;
    auto* gen_cmd = app.add_subcommand("gen-s1", "Generate the two-input sine-sum regression dataset");
    gen_cmd->add_option("--n", gen_args.n, "Number of observations");
    gen_cmd->add_option("--seed", gen_args.seed, "Sampling seed");
    gen_cmd->add_option("--out", gen_args.out, "Output CSV (default: stdout)");
    gen_cmd->add_option("--points", gen_args.points, "Optional 2-D point file to sample from instead of U[0,1]^2");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (fit_cmd->parsed()) return cmd_fit(fit_args, out, err);
        if (pred_cmd->parsed()) return cmd_predict(pred_args, out, err);
        if (sel_cmd->parsed()) return cmd_select_refs(sel_args, out, err);
        if (bench_cmd->parsed()) return cmd_benchmark(config_path, out, err);
        if (gen_cmd->parsed()) return cmd_gen_s1(gen_args, out, err);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace mlm::cli
