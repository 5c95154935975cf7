#include "upcr/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace upcr
{

namespace
{

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string &line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

struct CsvTable
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

CsvTable read_table(std::istream &in, const std::string &source)
{
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        auto fields = split_fields(line);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size()) {
            std::ostringstream msg;
            msg << source << ": line " << lineno << ": expected " << t.header.size() << " fields, found "
                << fields.size();
            throw InputError(msg.str());
        }
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(lineno);
    }
    if (!have_header) {
        throw InputError(source + ": empty file");
    }
    if (t.header.empty() || t.header[0] != "sample_id") {
        throw InputError(source + ": line 1: first column must be 'sample_id'");
    }
    if (t.rows.empty()) {
        throw InputError(source + ": no data rows");
    }
    return t;
}

double parse_value(const std::string &field, const std::string &source, std::size_t lineno, std::size_t col,
                   const std::string &column_name)
{
    double v = 0;
    const char *begin = field.data();
    const char *end = field.data() + field.size();
    const auto res = std::from_chars(begin, end, v);
    if (field.empty() || res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
        std::ostringstream msg;
        msg << source << ": line " << lineno << ", column " << col + 1 << " ('" << column_name
            << "'): invalid or non-finite value '" << field << "'";
        throw InputError(msg.str());
    }
    return v;
}

json vec_to_json(const VectorXd &v)
{
    json arr = json::array();
    for (Index i = 0; i < v.size(); ++i) {
        arr.push_back(v(i));
    }
    return arr;
}

VectorXd vec_from_json(const json &j)
{
    VectorXd v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Index>(i)) = j.at(i).get<double>();
    }
    return v;
}

json curve_to_json(const ResidualCurve &curve)
{
    json q = json::array(), res = json::array(), deg = json::array();
    for (const auto &p : curve.points) {
        q.push_back(p.q);
        res.push_back(p.res);
        deg.push_back(p.degenerate);
    }
    return {{"q", q}, {"res", res}, {"degenerate", deg}, {"collinear", curve.collinear}, {"flat", curve.flat}};
}

template <typename T>
void read_if(const json &j, const char *key, T &dst)
{
    if (j.contains(key)) {
        dst = j.at(key).get<T>();
    }
}

} // namespace

std::string format_double(double x)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

PredictionMatrix parse_predictions_csv(std::istream &in, const std::string &source)
{
    const CsvTable t = read_table(in, source);
    if (t.header.size() < 2) {
        throw InputError(source + ": line 1: need at least one regressor column after 'sample_id'");
    }
    const auto m = static_cast<Index>(t.header.size() - 1);
    const auto n = static_cast<Index>(t.rows.size());
    std::vector<std::string> names(t.header.begin() + 1, t.header.end());
    std::vector<std::string> ids;
    MatrixXd values(m, n);
    for (Index j = 0; j < n; ++j) {
        const auto &row = t.rows[static_cast<std::size_t>(j)];
        ids.push_back(row[0]);
        for (Index i = 0; i < m; ++i) {
            const auto col = static_cast<std::size_t>(i + 1);
            values(i, j) = parse_value(row[col], source, t.line_numbers[static_cast<std::size_t>(j)], col,
                                       t.header[col]);
        }
    }
    try {
        return PredictionMatrix(std::move(names), std::move(ids), std::move(values));
    } catch (const InputError &e) {
        throw InputError(source + ": " + e.what());
    }
}

PredictionMatrix read_predictions_csv(const std::string &path)
{
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open predictions file '" + path + "'");
    }
    return parse_predictions_csv(in, path);
}

void write_predictions_csv(std::ostream &out, const PredictionMatrix &preds)
{
    out << "sample_id";
    for (const auto &name : preds.regressor_names()) {
        out << ',' << name;
    }
    out << '\n';
    for (Index j = 0; j < preds.num_samples(); ++j) {
        out << preds.sample_ids()[static_cast<std::size_t>(j)];
        for (Index i = 0; i < preds.num_regressors(); ++i) {
            out << ',' << format_double(preds.values()(i, j));
        }
        out << '\n';
    }
}

Labels parse_labels_csv(std::istream &in, const std::string &source)
{
    const CsvTable t = read_table(in, source);
    if (t.header.size() != 2) {
        throw InputError(source + ": line 1: labels file must have exactly the columns 'sample_id,y'");
    }
    Labels out;
    out.y.resize(static_cast<Index>(t.rows.size()));
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        if (!seen.emplace(t.rows[k][0], k).second) {
            std::ostringstream msg;
            msg << source << ": line " << t.line_numbers[k] << ": duplicate sample id '" << t.rows[k][0] << "'";
            throw InputError(msg.str());
        }
        out.sample_ids.push_back(t.rows[k][0]);
        out.y(static_cast<Index>(k)) = parse_value(t.rows[k][1], source, t.line_numbers[k], 1, t.header[1]);
    }
    return out;
}

Labels read_labels_csv(const std::string &path)
{
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open labels file '" + path + "'");
    }
    return parse_labels_csv(in, path);
}

void write_labels_csv(std::ostream &out, const std::vector<std::string> &ids, const VectorXd &y,
                      const std::string &value_column)
{
    out << "sample_id," << value_column << '\n';
    for (std::size_t j = 0; j < ids.size(); ++j) {
        out << ids[j] << ',' << format_double(y(static_cast<Index>(j))) << '\n';
    }
}

VectorXd align_labels(const Labels &labels, const std::vector<std::string> &sample_ids)
{
    if (labels.sample_ids.size() != sample_ids.size()) {
        std::ostringstream msg;
        msg << "labels have " << labels.sample_ids.size() << " samples but predictions have " << sample_ids.size();
        throw InputError(msg.str());
    }
    std::unordered_map<std::string, Index> pos;
    for (std::size_t k = 0; k < labels.sample_ids.size(); ++k) {
        pos.emplace(labels.sample_ids[k], static_cast<Index>(k));
    }
    VectorXd out(static_cast<Index>(sample_ids.size()));
    for (std::size_t j = 0; j < sample_ids.size(); ++j) {
        const auto it = pos.find(sample_ids[j]);
        if (it == pos.end()) {
            throw InputError("sample id '" + sample_ids[j] + "' has no label");
        }
        out(static_cast<Index>(j)) = labels.y(it->second);
    }
    return out;
}

json config_to_json(const PipelineConfig &cfg)
{
    return {{"loss", to_string(cfg.loss)},
            {"grid_points", cfg.grid_points},
            {"eps_l", cfg.eps_l},
            {"prune_abs_frac", cfg.prune_abs_frac},
            {"prune_rel_frac", cfg.prune_rel_frac},
            {"two_pc_trace_frac", cfg.two_pc_trace_frac},
            {"min_ensemble_size", cfg.min_ensemble_size}};
}

PipelineConfig config_from_json(const json &j, PipelineConfig base)
{
    try {
        if (j.contains("loss")) {
            base.loss = parse_loss(j.at("loss").get<std::string>());
        }
        read_if(j, "grid_points", base.grid_points);
        read_if(j, "eps_l", base.eps_l);
        read_if(j, "prune_abs_frac", base.prune_abs_frac);
        read_if(j, "prune_rel_frac", base.prune_rel_frac);
        read_if(j, "two_pc_trace_frac", base.two_pc_trace_frac);
        read_if(j, "min_ensemble_size", base.min_ensemble_size);
    } catch (const json::exception &e) {
        throw InputError(std::string("bad config: ") + e.what());
    }
    base.validate();
    return base;
}

json report_to_json(const FittedEnsemble &fit, const PipelineConfig &cfg)
{
    const auto m = static_cast<Index>(fit.regressor_names.size());
    std::vector<Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), Index(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return fit.mse_estimates(a) < fit.mse_estimates(b); });
    std::vector<Index> rank(static_cast<std::size_t>(m));
    json ranking = json::array();
    for (std::size_t r = 0; r < order.size(); ++r) {
        rank[static_cast<std::size_t>(order[r])] = static_cast<Index>(r + 1);
        ranking.push_back(fit.regressor_names[static_cast<std::size_t>(order[r])]);
    }

    std::vector<double> weight_of(static_cast<std::size_t>(m), std::nan(""));
    if (fit.weights) {
        for (std::size_t k = 0; k < fit.kept.size(); ++k) {
            weight_of[static_cast<std::size_t>(fit.kept[k])] = (*fit.weights)(static_cast<Index>(k));
        }
    }

    json regressors = json::array();
    json kept = json::array();
    json pruned = json::array();
    for (Index i = 0; i < m; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        json r = {{"name", fit.regressor_names[ui]},
                  {"mean", fit.regressor_means(i)},
                  {"bias_estimate", fit.bias_estimates(i)},
                  {"rho_hat", fit.rho_hat_all(i)},
                  {"mse_estimate", fit.mse_estimates(i)},
                  {"mse_rank", rank[ui]}};
        const char *status = fit.prune_rules.empty() ? "not_evaluated" : to_string(fit.prune_rules[ui]);
        r["prune_rule"] = status;
        r["weight"] = std::isnan(weight_of[ui]) ? json(nullptr) : json(weight_of[ui]);
        if (!fit.prune_rules.empty() && fit.prune_rules[ui] != PruneRule::Kept) {
            pruned.push_back({{"name", fit.regressor_names[ui]}, {"rule", status}});
        }
        regressors.push_back(std::move(r));
    }
    for (const auto &name : fit.kept_names()) {
        kept.push_back(name);
    }

    json eigenvalues = json::array();
    for (Index k = 0; k < fit.eigen.size(); ++k) {
        eigenvalues.push_back(fit.eigen.value(k));
    }
    json weights = nullptr;
    if (fit.weights) {
        weights = json::object();
        const auto names = fit.kept_names();
        for (std::size_t k = 0; k < names.size(); ++k) {
            weights[names[k]] = (*fit.weights)(static_cast<Index>(k));
        }
    }
    const double lambda2 = fit.eigen.size() >= 2 ? fit.eigen.value(1) : 0.0;

    return {{"difficulty", to_string(fit.difficulty)},
            {"hard_stage", to_string(fit.hard_stage)},
            {"mean_y", fit.mean_y},
            {"var_y", fit.var_y},
            {"g2_hat", fit.g2_hat},
            {"g2_ratio", fit.g2_hat / fit.var_y},
            {"g2_from_fallback", fit.g2_from_fallback},
            {"initial_g2_hat", fit.initial_g2_hat},
            {"residual_curve", curve_to_json(fit.curve)},
            {"initial_residual_curve", curve_to_json(fit.initial_curve)},
            {"eigenvalues", eigenvalues},
            {"trace", fit.trace},
            {"lambda2_trace_fraction", fit.trace != 0 ? lambda2 / fit.trace : 0.0},
            {"used_two_pcs", fit.used_two_pcs},
            {"used_fallback_average", fit.used_fallback_average},
            {"rho_hat", vec_to_json(fit.rho_hat_all)},
            {"mse_estimates", vec_to_json(fit.mse_estimates)},
            {"bias_estimates", vec_to_json(fit.bias_estimates)},
            {"ranking", ranking},
            {"kept", kept},
            {"pruned", pruned},
            {"weights", weights},
            {"regressors", regressors},
            {"config", config_to_json(cfg)}};
}

json model_to_json(const FittedEnsemble &fit)
{
    json kept = json::array();
    for (Index i : fit.kept) {
        kept.push_back(i);
    }
    return {{"format", "upcr-model"},
            {"version", 1},
            {"difficulty", to_string(fit.difficulty)},
            {"mean_y", fit.mean_y},
            {"var_y", fit.var_y},
            {"regressor_names", fit.regressor_names},
            {"regressor_means", vec_to_json(fit.regressor_means)},
            {"kept", kept},
            {"weights", fit.weights ? vec_to_json(*fit.weights) : json(nullptr)}};
}

FittedEnsemble model_from_json(const json &j)
{
    try {
        if (j.value("format", "") != "upcr-model") {
            throw InputError("not a U-PCR model file");
        }
        FittedEnsemble fit;
        const auto difficulty = j.at("difficulty").get<std::string>();
        fit.difficulty = difficulty == "tractable" ? Difficulty::Tractable : Difficulty::Hard;
        fit.mean_y = j.at("mean_y").get<double>();
        fit.var_y = j.at("var_y").get<double>();
        fit.regressor_names = j.at("regressor_names").get<std::vector<std::string>>();
        fit.regressor_means = vec_from_json(j.at("regressor_means"));
        for (const auto &k : j.at("kept")) {
            const auto idx = k.get<Index>();
            if (idx < 0 || idx >= static_cast<Index>(fit.regressor_names.size())) {
                throw InputError("model file: kept index out of range");
            }
            fit.kept.push_back(idx);
        }
        if (!j.at("weights").is_null()) {
            fit.weights = vec_from_json(j.at("weights"));
        }
        if (fit.regressor_means.size() != static_cast<Index>(fit.regressor_names.size())) {
            throw InputError("model file: regressor_means and regressor_names differ in length");
        }
        return fit;
    } catch (const json::exception &e) {
        throw InputError(std::string("bad model file: ") + e.what());
    }
}

json synth_spec_to_json(const SyntheticEnsembleSpec &spec)
{
    json j = {{"m", spec.m},
              {"n", spec.n},
              {"signal", to_string(spec.signal)},
              {"g2", spec.g2},
              {"mean_y", spec.mean_y},
              {"epsilon", spec.epsilon},
              {"h_variances", vec_to_json(spec.h_variances)},
              {"a_values", vec_to_json(spec.a_values)},
              {"seed", spec.seed}};
    j["noise_on_y"] = spec.noise_on_y ? json(*spec.noise_on_y) : json(nullptr);
    return j;
}

SyntheticEnsembleSpec synth_spec_from_json(const json &j, SyntheticEnsembleSpec base)
{
    try {
        read_if(j, "m", base.m);
        read_if(j, "n", base.n);
        if (j.contains("signal")) {
            base.signal = parse_signal(j.at("signal").get<std::string>());
        }
        read_if(j, "g2", base.g2);
        read_if(j, "mean_y", base.mean_y);
        read_if(j, "epsilon", base.epsilon);
        read_if(j, "seed", base.seed);
        if (j.contains("h_variances")) {
            base.h_variances = vec_from_json(j.at("h_variances"));
        }
        if (j.contains("a_values")) {
            base.a_values = vec_from_json(j.at("a_values"));
        }
        if (j.contains("noise_on_y") && !j.at("noise_on_y").is_null()) {
            base.noise_on_y = j.at("noise_on_y").get<double>();
        }
    } catch (const json::exception &e) {
        throw InputError(std::string("bad simulation spec: ") + e.what());
    }
    base.validate();
    return base;
}

json truth_to_json(const SyntheticTruth &truth)
{
    json c = json::array();
    for (Index i = 0; i < truth.c_population.rows(); ++i) {
        c.push_back(vec_to_json(truth.c_population.row(i).transpose()));
    }
    return {{"g2", truth.g2},
            {"mean_y", truth.mean_y},
            {"var_y", truth.var_y},
            {"epsilon", truth.epsilon},
            {"rho", vec_to_json(truth.rho)},
            {"a", vec_to_json(truth.a)},
            {"d", vec_to_json(truth.d)},
            {"c_population", c}};
}

json read_json_file(const std::string &path)
{
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open '" + path + "'");
    }
    try {
        return json::parse(in);
    } catch (const json::exception &e) {
        throw InputError(path + ": " + e.what());
    }
}

void write_text_file(const std::string &path, const std::string &text)
{
    std::ofstream out(path);
    if (!out) {
        throw InputError("cannot write '" + path + "'");
    }
    out << text;
}

} // namespace upcr
