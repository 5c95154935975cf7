#include <doctest.h>

#include <random>
#include <sstream>

#include "upcr/estimator.hpp"
#include "upcr/io.hpp"
#include "upcr/synth.hpp"

using namespace upcr;

namespace
{

std::string error_of(const std::string &csv)
{
    std::istringstream in(csv);
    try {
        parse_predictions_csv(in, "preds.csv");
    } catch (const InputError &e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST_CASE("predictions CSV: samples as rows, experts as columns")
{
    std::istringstream in("sample_id,ridge,knn\nx1,1.5,2\nx2,-3,4e-1\n\n");
    const PredictionMatrix p = parse_predictions_csv(in, "t");
    CHECK(p.regressor_names() == std::vector<std::string>{"ridge", "knn"});
    CHECK(p.sample_ids() == std::vector<std::string>{"x1", "x2"});
    MatrixXd expected(2, 2);
    expected << 1.5, -3, 2, 0.4;
    CHECK(p.values() == expected);
}

TEST_CASE("predictions CSV errors name the line and column")
{
    CHECK(error_of("sample_id,a,b\n1,2,oops\n").find("preds.csv: line 2, column 3 ('b')") != std::string::npos);
    CHECK(error_of("sample_id,a,b\n1,2,3\n2,nan,3\n").find("line 3, column 2 ('a')") != std::string::npos);
    CHECK(error_of("sample_id,a,b\n1,2,inf\n").find("line 2, column 3") != std::string::npos);
    CHECK(error_of("sample_id,a,b\n1,2\n").find("line 2") != std::string::npos);
    CHECK(error_of("id,a\n1,2\n").find("sample_id") != std::string::npos);
    CHECK(error_of("sample_id,a,a\n1,2,3\n").find("duplicate") != std::string::npos);
    CHECK(error_of("sample_id,a\n1,2\n1,3\n").find("duplicate") != std::string::npos);
    CHECK(error_of("") != "");
    CHECK(error_of("sample_id,a\n") != "");
}

TEST_CASE("predictions CSV round-trips bit-exactly")
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z(0, 1e3);
    MatrixXd v(4, 9);
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 9; ++j) v(i, j) = z(rng) / 7.0;
    v(0, 0) = 1e-300;
    v(1, 1) = -0.0;
    const PredictionMatrix p(v);
    std::stringstream buf;
    write_predictions_csv(buf, p);
    const PredictionMatrix back = parse_predictions_csv(buf, "buf");
    CHECK(back.values() == p.values());
    CHECK(back.regressor_names() == p.regressor_names());
    CHECK(back.sample_ids() == p.sample_ids());
}

TEST_CASE("labels CSV and alignment by sample id")
{
    std::istringstream in("sample_id,y\nb,2\na,1\nc,3\n");
    const Labels l = parse_labels_csv(in, "labels.csv");
    const VectorXd aligned = align_labels(l, {"a", "b", "c"});
    CHECK(aligned == (VectorXd(3) << 1, 2, 3).finished());
    CHECK_THROWS_AS(align_labels(l, {"a", "b", "d"}), InputError);
    CHECK_THROWS_AS(align_labels(l, {"a", "b"}), InputError);
    std::istringstream bad("sample_id,y,extra\na,1,2\n");
    CHECK_THROWS_AS(parse_labels_csv(bad, "x"), InputError);

    std::ostringstream out;
    write_labels_csv(out, {"p", "q"}, (VectorXd(2) << 0.1, 2).finished(), "y_hat");
    CHECK(out.str() == "sample_id,y_hat\np,0.1\nq,2\n");
}

TEST_CASE("format_double is shortest round-trip")
{
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
    CHECK(std::stod(format_double(2.0 / 3.0)) == 2.0 / 3.0);
}

TEST_CASE("config JSON keys mirror the field names")
{
    PipelineConfig cfg;
    cfg.loss = Loss::Absolute;
    cfg.grid_points = 11;
    cfg.eps_l = 0.2;
    cfg.min_ensemble_size = 3;
    const json j = config_to_json(cfg);
    for (const char *key : {"loss", "grid_points", "eps_l", "prune_abs_frac", "prune_rel_frac", "two_pc_trace_frac",
                            "min_ensemble_size"})
        CHECK(j.contains(key));
    const PipelineConfig back = config_from_json(j);
    CHECK(back.loss == Loss::Absolute);
    CHECK(back.grid_points == 11);
    CHECK(back.eps_l == 0.2);
    CHECK(back.prune_rel_frac == cfg.prune_rel_frac);
    CHECK(back.min_ensemble_size == 3);

    const PipelineConfig partial = config_from_json(json{{"eps_l", 0.3}});
    CHECK(partial.eps_l == 0.3);
    CHECK(partial.grid_points == 201);
    CHECK_THROWS_AS(config_from_json(json{{"grid_points", "many"}}), InputError);
    CHECK_THROWS_AS(config_from_json(json{{"loss", "huber"}}), InputError);
}

TEST_CASE("model JSON round-trip predicts bit-identically")
{
    SyntheticEnsembleSpec spec;
    spec.m = 7;
    spec.n = 400;
    spec.mean_y = 2.5;
    spec.epsilon = 0.3;
    spec.seed = 12;
    const auto ens = generate(spec);
    const FittedEnsemble fit = upcr_fit(ens.predictions, ens.moments());
    REQUIRE(fit.tractable());
    const json j = model_to_json(fit);
    CHECK(j["format"] == "upcr-model");
    const FittedEnsemble back = model_from_json(json::parse(j.dump()));
    CHECK(back.kept == fit.kept);
    CHECK(*back.weights == *fit.weights);
    CHECK(back.regressor_means == fit.regressor_means);
    CHECK(back.mean_y == fit.mean_y);
    CHECK(predict(back, ens.predictions) == predict(fit, ens.predictions));

    CHECK_THROWS_AS(model_from_json(json{{"format", "other"}}), InputError);
    json broken = j;
    broken["kept"] = json::array({99});
    CHECK_THROWS_AS(model_from_json(broken), InputError);
}

TEST_CASE("report JSON carries the full diagnosis")
{
    SyntheticEnsembleSpec spec;
    spec.m = 6;
    spec.n = 500;
    spec.epsilon = 0.3;
    spec.seed = 4;
    const auto ens = generate(spec);
    PipelineConfig cfg;
    cfg.grid_points = 3;
    const FittedEnsemble fit = upcr_fit(ens.predictions, ens.moments(), cfg);
    const json r = report_to_json(fit, cfg);
    for (const char *key : {"difficulty", "g2_hat", "g2_ratio", "residual_curve", "rho_hat", "mse_estimates",
                            "ranking", "kept", "pruned", "eigenvalues", "lambda2_trace_fraction", "used_two_pcs",
                            "used_fallback_average", "weights", "bias_estimates", "config"})
        CHECK(r.contains(key));
    const auto &q = r["residual_curve"]["q"];
    REQUIRE(q.size() == 3);
    CHECK(q[0].get<double>() == 0.0);
    CHECK(q[1].get<double>() == fit.var_y / 2);
    CHECK(q[2].get<double>() == fit.var_y);
    CHECK(r["mse_estimates"].size() == 6);
}

TEST_CASE("simulation spec JSON round-trip")
{
    SyntheticEnsembleSpec spec;
    spec.m = 3;
    spec.n = 20;
    spec.signal = SignalKind::Friedman3;
    spec.epsilon = 0.25;
    spec.h_variances = (VectorXd(3) << 1, 2, 3).finished();
    spec.noise_on_y = 0.7;
    spec.seed = 123456789012345ULL;
    const SyntheticEnsembleSpec back = synth_spec_from_json(json::parse(synth_spec_to_json(spec).dump()));
    CHECK(back.m == 3);
    CHECK(back.signal == SignalKind::Friedman3);
    CHECK(back.h_variances == spec.h_variances);
    CHECK(back.noise_on_y == 0.7);
    CHECK(back.seed == spec.seed);
    CHECK(generate(back).y == generate(spec).y);
}
