#include "upcr/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "upcr/baselines.hpp"
#include "upcr/estimator.hpp"
#include "upcr/io.hpp"
#include "upcr/synth.hpp"

namespace upcr
{

namespace
{

struct PipelineFlags
{
    std::optional<std::string> config_path;
    std::optional<double> mean_y;
    std::optional<double> var_y;
    std::optional<std::string> loss;
    std::optional<int> grid_points;
    std::optional<double> eps_l;

    void add_to(CLI::App &cmd)
    {
        cmd.add_option("--config", config_path, "Pipeline config JSON (may also carry mean_y, var_y)");
        cmd.add_option("--mean-y", mean_y, "Known mean of the response");
        cmd.add_option("--var-y", var_y, "Known variance of the response");
        cmd.add_option("--loss", loss, "Loss for the offset fit: squared|absolute");
        cmd.add_option("--grid-points", grid_points, "Number of q grid points on [0, var(Y)]");
        cmd.add_option("--eps-l", eps_l, "Hard-problem threshold on g2_hat / var(Y)");
    }

    json config_json() const { return config_path ? read_json_file(*config_path) : json::object(); }

    PipelineConfig config() const
    {
        PipelineConfig cfg = config_from_json(config_json());
        if (loss) cfg.loss = parse_loss(*loss);
        if (grid_points) cfg.grid_points = *grid_points;
        if (eps_l) cfg.eps_l = *eps_l;
        cfg.validate();
        return cfg;
    }

    // Flags win over config keys; nullopt if neither provides both moments.
    std::optional<ResponseMoments> moments() const
    {
        const json j = config_json();
        std::optional<double> mu = mean_y, var = var_y;
        if (!mu && j.contains("mean_y")) mu = j.at("mean_y").get<double>();
        if (!var && j.contains("var_y")) var = j.at("var_y").get<double>();
        if (!mu || !var) {
            return std::nullopt;
        }
        return ResponseMoments(*mu, *var);
    }
};

std::string fmt_num(double x, int precision = 4)
{
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << x;
    return s.str();
}

void print_estimate_summary(std::ostream &out, const FittedEnsemble &fit)
{
    out << "difficulty: " << to_string(fit.difficulty);
    if (fit.hard_stage != HardStage::None) {
        out << " (" << to_string(fit.hard_stage) << ")";
    }
    out << "\ng2_hat: " << fmt_num(fit.g2_hat) << "  g2_hat/var_y: " << fmt_num(fit.g2_hat / fit.var_y) << '\n';
    out << std::left << std::setw(20) << "regressor" << std::right << std::setw(12) << "rho_hat" << std::setw(12)
        << "est_mse" << std::setw(12) << "status" << std::setw(12) << "weight" << '\n';
    for (std::size_t i = 0; i < fit.regressor_names.size(); ++i) {
        const auto ii = static_cast<Index>(i);
        std::string weight = "-";
        const auto kept = std::find(fit.kept.begin(), fit.kept.end(), ii);
        if (fit.weights && kept != fit.kept.end()) {
            weight = fmt_num((*fit.weights)(kept - fit.kept.begin()));
        }
        const char *status = fit.prune_rules.empty() ? "-" : to_string(fit.prune_rules[i]);
        out << std::left << std::setw(20) << fit.regressor_names[i] << std::right << std::setw(12)
            << fmt_num(fit.rho_hat_all(ii)) << std::setw(12) << fmt_num(std::max(0.0, fit.mse_estimates(ii)))
            << std::setw(12) << status << std::setw(12) << weight << '\n';
    }
}

int cmd_estimate(const std::string &predictions, const PipelineFlags &flags, const std::optional<std::string> &output,
                 const std::optional<std::string> &model_path, std::ostream &out)
{
    const PipelineConfig cfg = flags.config();
    const auto moments = flags.moments();
    if (!moments) {
        throw InputError("estimate needs --mean-y and --var-y (or mean_y/var_y in --config)");
    }
    const PredictionMatrix preds = read_predictions_csv(predictions);
    const FittedEnsemble fit = upcr_fit(preds, *moments, cfg);

    const std::string report = report_to_json(fit, cfg).dump(2) + "\n";
    if (output) {
        write_text_file(*output, report);
        print_estimate_summary(out, fit);
    } else {
        out << report;
    }
    if (model_path) {
        write_text_file(*model_path, model_to_json(fit).dump(2) + "\n");
    }
    return fit.tractable() ? kExitOk : kExitHard;
}

int cmd_predict(const std::string &model_path, const std::string &predictions,
                const std::optional<std::string> &output, std::ostream &out)
{
    const FittedEnsemble fit = model_from_json(read_json_file(model_path));
    const PredictionMatrix preds = read_predictions_csv(predictions);
    const VectorXd y_hat = predict(fit, preds);
    std::ostringstream csv;
    write_labels_csv(csv, preds.sample_ids(), y_hat, "y_hat");
    if (output) {
        write_text_file(*output, csv.str());
    } else {
        out << csv.str();
    }
    return kExitOk;
}

struct SimulateFlags
{
    std::optional<std::string> config_path;
    std::optional<Index> m;
    std::optional<Index> n;
    std::optional<double> epsilon;
    std::optional<std::string> signal;
    std::optional<double> g2;
    std::optional<double> mean_y;
    std::optional<double> noise_var;
    std::optional<double> h_var;
    std::optional<std::uint64_t> seed;
    std::string output;
};

int cmd_simulate(const SimulateFlags &f, std::ostream &out)
{
    SyntheticEnsembleSpec spec;
    if (f.config_path) {
        spec = synth_spec_from_json(read_json_file(*f.config_path));
    }
    if (f.m) spec.m = *f.m;
    if (f.n) spec.n = *f.n;
    if (f.epsilon) spec.epsilon = *f.epsilon;
    if (f.signal) spec.signal = parse_signal(*f.signal);
    if (f.g2) spec.g2 = *f.g2;
    if (f.mean_y) spec.mean_y = *f.mean_y;
    if (f.noise_var) spec.noise_on_y = *f.noise_var;
    if (f.seed) spec.seed = *f.seed;
    if (f.h_var) spec.h_variances = VectorXd::Constant(spec.m, *f.h_var);
    if (spec.h_variances.size() != 0 && spec.h_variances.size() != spec.m) {
        throw InputError("h_variances length does not match m");
    }

    const SyntheticEnsemble ens = generate(spec);
    std::filesystem::create_directories(f.output);
    const std::filesystem::path dir(f.output);

    std::ostringstream preds, labels;
    write_predictions_csv(preds, ens.predictions);
    write_labels_csv(labels, ens.predictions.sample_ids(), ens.y);
    json truth = truth_to_json(ens.truth);
    truth["spec"] = synth_spec_to_json(spec);

    write_text_file((dir / "predictions.csv").string(), preds.str());
    write_text_file((dir / "labels.csv").string(), labels.str());
    write_text_file((dir / "truth.json").string(), truth.dump(2) + "\n");
    out << "wrote " << (dir / "predictions.csv").string() << ", " << (dir / "labels.csv").string() << ", "
        << (dir / "truth.json").string() << '\n';
    return kExitOk;
}

int cmd_eval(const std::string &predictions, const std::string &labels_path, const PipelineFlags &flags,
             const std::optional<std::string> &output, std::ostream &out)
{
    const PipelineConfig cfg = flags.config();
    const PredictionMatrix preds = read_predictions_csv(predictions);
    const Labels labels = read_labels_csv(labels_path);
    const VectorXd y = align_labels(labels, preds.sample_ids());

    std::optional<ResponseMoments> moments = flags.moments();
    if (!moments) {
        const double mu = y.mean();
        moments.emplace(mu, (y.array() - mu).square().mean());
    }

    const auto rows = compare_methods(preds, y, *moments, cfg);

    std::ostringstream csv;
    csv << "method,detail,mse,normalized_mse,band\n";
    for (const auto &r : rows) {
        csv << r.method << ',' << r.detail << ',';
        if (r.score) {
            csv << format_double(r.score->mse) << ',' << format_double(r.score->normalized_mse) << ','
                << to_string(r.score->band) << '\n';
        } else {
            csv << "NA,NA,NA\n";
        }
    }
    if (output) {
        write_text_file(*output, csv.str());
    }

    out << std::left << std::setw(24) << "method" << std::setw(20) << "detail" << std::right << std::setw(16)
        << "normalized_mse" << std::setw(14) << "band" << '\n';
    for (const auto &r : rows) {
        out << std::left << std::setw(24) << r.method << std::setw(20) << r.detail << std::right << std::setw(16)
            << (r.score ? fmt_num(r.score->normalized_mse) : std::string("NA")) << std::setw(14)
            << (r.score ? to_string(r.score->band) : "NA") << '\n';
    }
    return kExitOk;
}

} // namespace

std::vector<MethodScore> compare_methods(const PredictionMatrix &preds, const VectorXd &y,
                                         const ResponseMoments &moments, const PipelineConfig &cfg)
{
    if (y.size() != preds.num_samples()) {
        throw InputError("labels and predictions differ in sample count");
    }
    std::vector<MethodScore> rows;
    const auto &names = preds.regressor_names();
    const Index m = preds.num_regressors();

    std::optional<FittedEnsemble> fit;
    MethodScore upcr_row{"upcr", "", std::nullopt};
    if (m >= 3) {
        try {
            fit = upcr_fit(preds, moments, cfg);
            if (fit->tractable()) {
                upcr_row.score = evaluate(predict(*fit, preds), y, moments);
                upcr_row.detail = fit->used_fallback_average ? "average" : (fit->used_two_pcs ? "two_pcs" : "one_pc");
            } else {
                upcr_row.detail = "hard";
            }
        } catch (const NumericalError &) {
            upcr_row.detail = "numerical_failure";
        }
    } else {
        upcr_row.detail = "needs_m>=3";
    }
    rows.push_back(upcr_row);

    rows.push_back({"mean", "", evaluate(ensemble_mean(preds), y, moments)});
    rows.push_back({"median", "", evaluate(ensemble_median(preds), y, moments)});

    const CenteredData centered = center_predictions(preds, moments);
    const OracleWeights ow = oracle_weights(centered.z, y, moments);
    rows.push_back({"oracle", ow.rank_deficient ? "min_norm" : "",
                    evaluate(linear_ensemble_predict(centered.z, ow.weights, moments), y, moments)});

    Index best = 0;
    double best_mse = 0;
    for (Index i = 0; i < m; ++i) {
        const double e = (preds.values().row(i).transpose() - y).squaredNorm();
        if (i == 0 || e < best_mse) {
            best = i;
            best_mse = e;
        }
    }
    auto single = [&](Index i) { return evaluate(preds.values().row(i).transpose(), y, moments); };
    rows.push_back({"best_single", names[static_cast<std::size_t>(best)], single(best)});

    if (fit) {
        Index est_best = 0, max_rho = 0;
        fit->mse_estimates.minCoeff(&est_best);
        fit->rho_hat_all.maxCoeff(&max_rho);
        rows.push_back({"estimated_best_single", names[static_cast<std::size_t>(est_best)], single(est_best)});
        rows.push_back({"max_rho_single", names[static_cast<std::size_t>(max_rho)], single(max_rho)});
    } else {
        rows.push_back({"estimated_best_single", "", std::nullopt});
        rows.push_back({"max_rho_single", "", std::nullopt});
    }

    try {
        const VectorXd w = gem_weights(misfit_covariance(preds, y));
        rows.push_back({"gem", "", evaluate(preds.values().transpose() * w, y, moments)});
    } catch (const NumericalError &) {
        rows.push_back({"gem", "ill_conditioned", std::nullopt});
    }
    return rows;
}

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err)
{
    CLI::App app{"Unsupervised ensemble regression (U-PCR)", "upcr"};
    app.require_subcommand(1);

    auto *estimate = app.add_subcommand("estimate", "Fit U-PCR on a predictions CSV and write a JSON report");
    std::string est_predictions;
    std::optional<std::string> est_output, est_model;
    PipelineFlags est_flags;
    estimate->add_option("--predictions", est_predictions, "Predictions CSV")->required();
    estimate->add_option("--output", est_output, "Report JSON path (stdout if omitted)");
    estimate->add_option("--model", est_model, "Also write a fitted-model JSON for `predict`");
    est_flags.add_to(*estimate);

    auto *predict_cmd = app.add_subcommand("predict", "Apply a fitted model to a predictions CSV");
    std::string pred_model, pred_predictions;
    std::optional<std::string> pred_output;
    predict_cmd->add_option("--model", pred_model, "Fitted-model JSON")->required();
    predict_cmd->add_option("--predictions", pred_predictions, "Predictions CSV")->required();
    predict_cmd->add_option("--output", pred_output, "Output CSV path (stdout if omitted)");

    auto *simulate = app.add_subcommand("simulate", "Generate a synthetic ensemble");
    SimulateFlags sim;
    simulate->add_option("--config", sim.config_path, "Simulation spec JSON");
    simulate->add_option("--m", sim.m, "Number of experts");
    simulate->add_option("--n", sim.n, "Number of samples");
    simulate->add_option("--epsilon", sim.epsilon, "Deviation scale");
    simulate->add_option("--signal", sim.signal, "normal|friedman1|friedman2|friedman3");
    simulate->add_option("--g2", sim.g2, "Signal variance (normal signal)");
    simulate->add_option("--mean-y", sim.mean_y, "Response mean (normal signal)");
    simulate->add_option("--noise-var", sim.noise_var, "Variance of Y - g(X)");
    simulate->add_option("--h-var", sim.h_var, "Common deviation variance D_ii");
    simulate->add_option("--seed", sim.seed, "RNG seed");
    simulate->add_option("--output", sim.output, "Output directory")->required();

    auto *eval = app.add_subcommand("eval", "Compare U-PCR with baselines against labels");
    std::string eval_predictions, eval_labels;
    std::optional<std::string> eval_output;
    PipelineFlags eval_flags;
    eval->add_option("--predictions", eval_predictions, "Predictions CSV")->required();
    eval->add_option("--labels", eval_labels, "Labels CSV")->required();
    eval->add_option("--output", eval_output, "Comparison table CSV");
    eval_flags.add_to(*eval);

    std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(rev.begin(), rev.end());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << '\n';
        return kExitInputError;
    }

    try {
        if (estimate->parsed()) {
            return cmd_estimate(est_predictions, est_flags, est_output, est_model, out);
        }
        if (predict_cmd->parsed()) {
            return cmd_predict(pred_model, pred_predictions, pred_output, out);
        }
        if (simulate->parsed()) {
            return cmd_simulate(sim, out);
        }
        if (eval->parsed()) {
            return cmd_eval(eval_predictions, eval_labels, eval_flags, eval_output, out);
        }
    } catch (const InputError &e) {
        err << "input error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const json::exception &e) {
        err << "input error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const NumericalError &e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::filesystem::filesystem_error &e) {
        err << "input error: " << e.what() << '\n';
        return kExitInputError;
    }
    return kExitInputError;
}

} // namespace upcr
