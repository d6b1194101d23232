#ifndef MLM_SERIALIZATION_HPP
#define MLM_SERIALIZATION_HPP

#include "mlm/evaluation.hpp"
#include "mlm/io.hpp"
#include "mlm/training.hpp"

#include <json.hpp>

#include <string>
#include <vector>

// JSON documents for models and benchmark reports, and the per-cell report
// CSV. Matrices are stored row-major as arrays of rows.

namespace mlm {

using Json = nlohmann::json;

inline constexpr const char* kModelSchema = "mlm-model/1";
inline constexpr const char* kReportSchema = "mlm-report/1";

namespace detail {

inline Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const Json& j, Index rows, Index cols, const std::string& key) {
    if (!j.is_array() || static_cast<Index>(j.size()) != rows)
        throw std::invalid_argument("model: '" + key + "' must have " + std::to_string(rows) + " rows");
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const Json& r = j[static_cast<std::size_t>(i)];
        if (!r.is_array() || static_cast<Index>(r.size()) != cols)
            throw std::invalid_argument("model: '" + key + "' row " + std::to_string(i) + " must have " +
                                        std::to_string(cols) + " entries");
        for (Index c = 0; c < cols; ++c) m(i, c) = r[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

inline Json vector_to_json(const Vector& v) {
    Json a = Json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Vector vector_from_json(const Json& j, Index n, const std::string& key) {
    if (!j.is_array() || static_cast<Index>(j.size()) != n)
        throw std::invalid_argument("model: '" + key + "' must have " + std::to_string(n) + " entries");
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
    return v;
}

inline Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace detail

/// Free-form metadata carried alongside a model.
struct ModelMetadata {
    std::vector<std::string> input_names;
    std::vector<std::string> output_names;
    std::string method;
    std::uint64_t seed = 0;
    Index n_train = 0;
};

inline Json model_to_json(const MlmModel& m, const ModelMetadata& meta = {}) {
    Json j;
    j["schema"] = kModelSchema;
    j["k"] = m.k();
    j["input_dim"] = m.input_dim();
    j["output_dim"] = m.output_dim();
    j["b"] = detail::matrix_to_json(m.b);
    j["reference_indices"] = m.refs.indices;
    j["reference_inputs"] = detail::matrix_to_json(m.refs.inputs);
    j["reference_outputs"] = detail::matrix_to_json(m.refs.outputs);
    j["input_scaler"] = {{"min", detail::vector_to_json(m.input_scaler.min)},
                         {"max", detail::vector_to_json(m.input_scaler.max)}};
    j["output_scaler"] = {{"min", detail::vector_to_json(m.output_scaler.min)},
                          {"max", detail::vector_to_json(m.output_scaler.max)}};
    j["fit"] = {{"residual_norm", m.fit_residual_norm},
                {"ridge", m.ridge},
                {"rank", m.rank},
                {"rank_deficient", m.rank_deficient},
                {"warnings", m.warnings}};
    j["metadata"] = {{"input_names", meta.input_names},
                     {"output_names", meta.output_names},
                     {"method", meta.method},
                     {"seed", meta.seed},
                     {"n_train", meta.n_train}};
    return j;
}

inline MlmModel model_from_json(const Json& j, ModelMetadata* meta = nullptr) {
    try {
        if (j.value("schema", std::string{}) != kModelSchema)
            throw std::invalid_argument(std::string("model: schema must be '") + kModelSchema + "'");
        const Index k = j.at("k").get<Index>();
        const Index p = j.at("input_dim").get<Index>();
        const Index l = j.at("output_dim").get<Index>();
        if (k < 1 || p < 1 || l < 1) throw std::invalid_argument("model: k, input_dim and output_dim must be positive");
        MlmModel m;
        m.b = detail::matrix_from_json(j.at("b"), k, k, "b");
        m.refs.indices = j.at("reference_indices").get<std::vector<Index>>();
        if (static_cast<Index>(m.refs.indices.size()) != k)
            throw std::invalid_argument("model: reference_indices must have k entries");
        m.refs.inputs = detail::matrix_from_json(j.at("reference_inputs"), k, p, "reference_inputs");
        m.refs.outputs = detail::matrix_from_json(j.at("reference_outputs"), k, l, "reference_outputs");
        m.input_scaler.min = detail::vector_from_json(j.at("input_scaler").at("min"), p, "input_scaler.min");
        m.input_scaler.max = detail::vector_from_json(j.at("input_scaler").at("max"), p, "input_scaler.max");
        m.output_scaler.min = detail::vector_from_json(j.at("output_scaler").at("min"), l, "output_scaler.min");
        m.output_scaler.max = detail::vector_from_json(j.at("output_scaler").at("max"), l, "output_scaler.max");
        const Json& f = j.at("fit");
        m.fit_residual_norm = f.at("residual_norm").get<double>();
        m.ridge = f.value("ridge", 0.0);
        m.rank = f.at("rank").get<Index>();
        m.rank_deficient = f.at("rank_deficient").get<bool>();
        m.warnings = f.value("warnings", std::vector<std::string>{});
        if (!m.b.allFinite()) throw std::invalid_argument("model: B has non-finite entries");
        if (meta && j.contains("metadata")) {
            const Json& md = j["metadata"];
            meta->input_names = md.value("input_names", std::vector<std::string>{});
            meta->output_names = md.value("output_names", std::vector<std::string>{});
            meta->method = md.value("method", std::string{});
            meta->seed = md.value("seed", std::uint64_t{0});
            meta->n_train = md.value("n_train", Index{0});
        }
        return m;
    } catch (const Json::exception& e) {
        throw std::invalid_argument(std::string("model: ") + e.what());
    }
}

inline void save_model(const std::string& path, const MlmModel& m, const ModelMetadata& meta = {}) {
    write_text(path, model_to_json(m, meta).dump(2) + "\n");
}

inline MlmModel load_model(const std::string& path, ModelMetadata* meta = nullptr) {
    Json j;
    try {
        j = Json::parse(read_text(path));
    } catch (const Json::parse_error& e) {
        throw std::invalid_argument("model '" + path + "': " + e.what());
    }
    return model_from_json(j, meta);
}

// ---------------------------------------------------------------------------
// Reports

inline Json report_to_json(const BenchmarkReport& r, bool include_timing = true) {
    Json j;
    j["schema"] = kReportSchema;
    j["dataset"] = r.dataset_id;
    j["n"] = r.n;
    j["p"] = r.p;
    j["l"] = r.l;

    Json methods = Json::array();
    for (Method m : r.config.methods) methods.push_back(std::string(to_string(m)));
    j["config"] = {{"methods", methods},
                   {"krel_grid", r.config.krel_grid},
                   {"outer_folds", r.config.outer_folds},
                   {"inner_folds", r.config.inner_folds},
                   {"root_seed", r.config.root_seed},
                   {"ban_policy", to_string(r.config.ban)},
                   {"parsimony_tol", r.config.parsimony_tol},
                   {"scaling", "min-max on outer-training rows, inputs and outputs"}};
    j["seeds"] = {{"root", r.config.root_seed},
                  {"derivation", seed_derivation_doc()},
                  {"outer_partition", r.outer_partition_seed},
                  {"inner_partition", r.inner_partition_seeds}};
    j["hygiene"] = {{"assertions", r.hygiene_assertions}, {"violations", r.hygiene_violations}};

    Json summaries = Json::array();
    for (const auto& ms : r.methods) {
        Json per = Json::array();
        for (const auto& ks : ms.per_krel) {
            Json vm = Json::array();
            for (double v : ks.validation_rmse_mean) vm.push_back(detail::finite_or_null(v));
            per.push_back({{"krel", ks.krel},
                           {"validation_rmse_mean", vm},
                           {"test_rmse", ks.test_rmse},
                           {"test_rmse_mean", detail::finite_or_null(ks.test_rmse_mean)},
                           {"test_rmse_median", detail::finite_or_null(ks.test_rmse_median)}});
        }
        Json chosen = Json::array();
        for (double v : ms.chosen_krel) chosen.push_back(detail::finite_or_null(v));
        summaries.push_back({{"method", std::string(to_string(ms.method))},
                             {"per_krel", per},
                             {"chosen_krel", chosen},
                             {"chosen_test_rmse", ms.chosen_test_rmse},
                             {"chosen_test_rmse_median", detail::finite_or_null(ms.chosen_test_rmse_median)}});
    }
    j["methods"] = summaries;

    Json cells = Json::array();
    for (const auto& c : r.cells) {
        Json cj = {{"method", std::string(to_string(c.method))},
                   {"outer_split", c.outer},
                   {"inner_fold", c.inner},
                   {"krel", c.krel},
                   {"k", c.k},
                   {"n_train", c.n_train},
                   {"n_validation", c.n_validation},
                   {"n_test", c.n_test},
                   {"selection_seed", c.selection_seed},
                   {"validation_rmse", detail::optional_number(c.validation_rmse)},
                   {"test_rmse", detail::optional_number(c.test_rmse)},
                   {"train_rmse", detail::optional_number(c.train_rmse)},
                   {"rank_deficient", c.rank_deficient},
                   {"chosen", c.chosen},
                   {"status", c.status}};
        if (include_timing) cj["wall_seconds"] = c.wall_seconds;
        cells.push_back(std::move(cj));
    }
    j["cells"] = cells;
    if (include_timing) j["timing"] = {{"wall_seconds", r.wall_seconds}};
    return j;
}

/// Column order of the per-cell report CSV.
inline const std::vector<std::string>& report_csv_columns() {
    static const std::vector<std::string> cols = {
        "dataset",   "method",          "outer_split",    "inner_fold", "krel",       "k",
        "n_train",   "n_validation",    "n_test",         "root_seed",  "selection_seed",
        "validation_rmse", "test_rmse", "train_rmse",     "rank_deficient", "chosen", "status"};
    return cols;
}

inline std::string report_to_csv(const BenchmarkReport& r) {
    auto num = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string{}; };
    auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char ch : s) {
            if (ch == '"') q += '"';
            q += ch;
        }
        return q + "\"";
    };
    std::string out;
    const auto& cols = report_csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
    out += '\n';
    for (const auto& c : r.cells) {
        out += quote(r.dataset_id) + ',' + std::string(to_string(c.method)) + ',' + std::to_string(c.outer) + ',' +
               std::to_string(c.inner) + ',' + format_double(c.krel) + ',' + std::to_string(c.k) + ',' +
               std::to_string(c.n_train) + ',' + std::to_string(c.n_validation) + ',' + std::to_string(c.n_test) +
               ',' + std::to_string(r.config.root_seed) + ',' + std::to_string(c.selection_seed) + ',' +
               num(c.validation_rmse) + ',' + num(c.test_rmse) + ',' + num(c.train_rmse) + ',' +
               (c.rank_deficient ? "1" : "0") + ',' + (c.chosen ? "1" : "0") + ',' + quote(c.status) + '\n';
    }
    return out;
}

}  // namespace mlm

#endif
