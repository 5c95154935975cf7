#include <doctest.h>

#include <random>

#include "upcr/baselines.hpp"
#include "upcr/estimator.hpp"
#include "upcr/synth.hpp"

using namespace upcr;

namespace
{

PredictionMatrix rows(std::initializer_list<std::initializer_list<double>> r)
{
    MatrixXd v(static_cast<Index>(r.size()), static_cast<Index>(r.begin()->size()));
    Index i = 0;
    for (const auto &row : r) {
        Index j = 0;
        for (double x : row) v(i, j++) = x;
        ++i;
    }
    return PredictionMatrix(v);
}

} // namespace

TEST_CASE("ensemble_mean examples")
{
    CHECK(ensemble_mean(rows({{1, 5, 2}})) == (VectorXd(3) << 1, 5, 2).finished());
    CHECK(ensemble_mean(rows({{1, 2}, {3, 4}})) == (VectorXd(2) << 2, 3).finished());
    CHECK(ensemble_mean(rows({{1, 2}, {1, 2}, {1, 2}})) == (VectorXd(2) << 1, 2).finished());
}

TEST_CASE("ensemble_median examples")
{
    CHECK(ensemble_median(rows({{1}, {2}, {100}}))(0) == 2.0);
    CHECK(ensemble_median(rows({{1}, {3}}))(0) == 2.0);
    CHECK(ensemble_median(rows({{7, -1}})) == (VectorXd(2) << 7, -1).finished());
    CHECK(ensemble_median(rows({{4, 0}, {1, 0}, {3, 9}, {2, 9}})) == (VectorXd(2) << 2.5, 4.5).finished());
}

TEST_CASE("oracle_weights examples")
{
    const ResponseMoments mom(1.0, 1.0);
    MatrixXd z(1, 4);
    z << 1, -1, 2, -2;
    VectorXd y = (z.row(0).transpose().array() + 1.0).matrix();
    auto w = oracle_weights(z, y, mom);
    CHECK(std::abs(w.weights(0) - 1.0) <= 1e-12);

    MatrixXd z2(2, 4);
    z2 << 1, -1, 0, 0, 0, 0, 1, -1;
    y = (z2.row(0).transpose().array() + 1.0).matrix();
    w = oracle_weights(z2, y, mom);
    CHECK((w.weights - (VectorXd(2) << 1, 0).finished()).norm() <= 1e-12);
    CHECK_FALSE(w.rank_deficient);

    MatrixXd dup(2, 4);
    dup << 1, -1, 2, -2, 1, -1, 2, -2;
    w = oracle_weights(dup, (dup.row(0).transpose().array() + 1.0).matrix(), mom);
    CHECK(w.rank_deficient);
    CHECK(std::abs(w.weights(0) - 0.5) <= 1e-12);
    CHECK(std::abs(w.weights(1) - 0.5) <= 1e-12);
    // Every (t, 1 − t) fits exactly; the returned split has the smallest norm on a fine grid.
    double best_t = 0, best_norm = 1e300;
    for (int k = 0; k <= 1000; ++k) {
        const double t = k / 1000.0;
        const double norm = t * t + (1 - t) * (1 - t);
        if (norm < best_norm) best_norm = norm, best_t = t;
    }
    CHECK(std::abs(w.weights(0) - best_t) <= 1e-3);
}

TEST_CASE("gem_weights examples")
{
    auto w = gem_weights(SymMatrix<double>::from_upper(MatrixXd::Identity(4, 4)));
    CHECK((w.array() - 0.25).abs().maxCoeff() <= 1e-15);
    w = gem_weights(SymMatrix<double>::from_upper(MatrixXd((VectorXd(2) << 1, 4).finished().asDiagonal())));
    CHECK((w - (VectorXd(2) << 0.8, 0.2).finished()).norm() <= 1e-14);
    MatrixXd near(2, 2);
    near << 1, 1 - 1e-14, 1 - 1e-14, 1;
    CHECK_THROWS_AS(gem_weights(SymMatrix<double>::from_upper(near)), NumericalError);
    CHECK_THROWS_AS(gem_weights(SymMatrix<double>(3)), NumericalError);
}

TEST_CASE("gem_weights sum to one")
{
    std::mt19937_64 rng(21);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 30; ++rep) {
        MatrixXd b(5, 8);
        for (Index i = 0; i < 5; ++i)
            for (Index j = 0; j < 8; ++j) b(i, j) = z(rng);
        const auto w = gem_weights(SymMatrix<double>::from_upper(MatrixXd(b * b.transpose())));
        CHECK(std::abs(w.sum() - 1) <= 1e-10);
    }
}

TEST_CASE("misfit_covariance matches its definition")
{
    const auto p = rows({{1, 2, 3}, {0, 2, 5}});
    const VectorXd y = (VectorXd(3) << 1, 1, 4).finished();
    const auto c = misfit_covariance(p, y);
    CHECK(c(0, 0) == doctest::Approx((0.0 + 1 + 1) / 3));
    CHECK(c(0, 1) == doctest::Approx((0.0 * -1 + 1 * 1 + -1 * 1) / 3));
    CHECK(c(1, 1) == doctest::Approx((1.0 + 1 + 1) / 3));
}

TEST_CASE("evaluate examples and bands")
{
    const ResponseMoments mom(0, 2);
    const VectorXd y = (VectorXd(4) << 1, -1, 2, -2).finished();
    auto e = evaluate(y, y, mom);
    CHECK(e.mse == 0);
    CHECK(e.band == DifficultyBand::Easy);

    const ResponseMoments empirical(0, y.squaredNorm() / 4);
    e = evaluate(VectorXd::Zero(4), y, empirical);
    CHECK(e.normalized_mse == doctest::Approx(1.0));
    CHECK(e.band == DifficultyBand::Hard);

    CHECK(difficulty_band(0.5) == DifficultyBand::Challenging);
    CHECK(difficulty_band(0.0999) == DifficultyBand::Easy);
    CHECK(difficulty_band(0.1) == DifficultyBand::Challenging);
    CHECK(difficulty_band(0.8) == DifficultyBand::Hard);
    CHECK(std::string(to_string(DifficultyBand::Challenging)) == "challenging");
    CHECK_THROWS_AS(evaluate(VectorXd::Zero(3), y, mom), InputError);
}

TEST_CASE("ensemble_mean equals a uniform-weight fitted ensemble")
{
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    MatrixXd v(5, 40);
    for (Index i = 0; i < 5; ++i)
        for (Index j = 0; j < 40; ++j) v(i, j) = z(rng);
    v = v.colwise() - v.rowwise().mean(); // bias-free experts around mean_y = 0
    const PredictionMatrix p(v);
    FittedEnsemble fit;
    fit.regressor_names = p.regressor_names();
    fit.difficulty = Difficulty::Tractable;
    fit.kept = {0, 1, 2, 3, 4};
    fit.weights = VectorXd::Constant(5, 0.2);
    fit.regressor_means = VectorXd::Zero(5);
    fit.mean_y = 0;
    CHECK((predict(fit, p) - ensemble_mean(p)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("the oracle is never beaten by other linear combiners in-sample")
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SyntheticEnsembleSpec spec;
        spec.m = 7;
        spec.n = 800;
        spec.epsilon = 0.5;
        spec.noise_on_y = 0.3;
        spec.h_variances = VectorXd::LinSpaced(7, 0.5, 3.0);
        spec.seed = seed;
        const auto ens = generate(spec);
        const auto mom = ens.moments();
        const auto centered = center_predictions(ens.predictions, mom);
        const auto w_or = oracle_weights(centered.z, ens.y, mom);
        const double oracle = evaluate(linear_ensemble_predict(centered.z, w_or.weights, mom), ens.y, mom).normalized_mse;
        const double mean = evaluate(ensemble_mean(ens.predictions), ens.y, mom).normalized_mse;
        const double mean_centered =
            evaluate(linear_ensemble_predict(centered.z, VectorXd::Constant(7, 1.0 / 7), mom), ens.y, mom).normalized_mse;
        CHECK(oracle <= mean_centered + 1e-10);
        CHECK(oracle <= mean + 1e-10);
        const auto fit = upcr_fit(ens.predictions, mom);
        if (fit.tractable()) CHECK(oracle <= evaluate(predict(fit, ens.predictions), ens.y, mom).normalized_mse + 1e-10);
    }
}
