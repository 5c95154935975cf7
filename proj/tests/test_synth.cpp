#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "upcr/estimator.hpp"
#include "upcr/synth.hpp"

using namespace upcr;

TEST_CASE("epsilon = 0 gives identical rank-one experts")
{
    SyntheticEnsembleSpec spec;
    spec.m = 5;
    spec.n = 100;
    spec.epsilon = 0;
    const auto ens = generate(spec);
    const MatrixXd &v = ens.predictions.values();
    for (Index i = 1; i < 5; ++i) CHECK(v.row(i) == v.row(0));
    CHECK(v.row(0).transpose() == ens.g);
    Eigen::JacobiSVD<MatrixXd> svd(v);
    CHECK(svd.singularValues()(1) <= 1e-12 * svd.singularValues()(0));

    spec.n = 200000;
    const auto big = generate(spec);
    const auto c = sample_covariance(center_predictions(big.predictions, big.moments()).z);
    CHECK((c.dense() - MatrixXd::Constant(5, 5, 1.0)).cwiseAbs().maxCoeff() <= 0.02);
}

TEST_CASE("exact population moments")
{
    const VectorXd a = (VectorXd(3) << 0.5, -0.2, 0.1).finished();
    const VectorXd d = (VectorXd(3) << 1, 2, 3).finished();
    const MatrixXd c = model_covariance(2.0, a, d, 0.3);
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j)
            CHECK(c(i, j) == doctest::Approx(2.0 + 0.3 * (a(i) + a(j)) + (i == j ? 0.09 * d(i) : 0.0)));

    SyntheticEnsembleSpec spec;
    spec.m = 3;
    spec.g2 = 2.0;
    spec.epsilon = 0.3;
    spec.a_values = a;
    spec.h_variances = d;
    spec.noise_on_y = 0.5;
    const auto ens = generate(spec);
    CHECK(ens.truth.var_y == doctest::Approx(2.5));
    CHECK((ens.truth.rho - (2.0 + 0.3 * a.array()).matrix()).norm() <= 1e-15);
    CHECK((ens.truth.c_population - c).norm() <= 1e-15);
}

TEST_CASE("cross-covariances converge to g2 when a = 0")
{
    SyntheticEnsembleSpec spec;
    spec.m = 4;
    spec.n = 100000;
    spec.g2 = 1.5;
    spec.epsilon = 0.5;
    spec.h_variances = VectorXd::Constant(4, 2.0);
    spec.seed = 17;
    const auto ens = generate(spec);
    const auto z = center_predictions(ens.predictions, ens.moments()).z;
    const double n = static_cast<double>(spec.n);
    for (Index i = 0; i < 4; ++i) {
        for (Index j = i + 1; j < 4; ++j) {
            const VectorXd prod = z.row(i).cwiseProduct(z.row(j)).transpose();
            const double est = prod.mean();
            const double se = std::sqrt((prod.array() - est).square().mean() / n);
            CHECK(std::abs(est - 1.5) <= 3 * se);
        }
    }
}

TEST_CASE("generated rho matches the Monte Carlo covariance with y")
{
    SyntheticEnsembleSpec spec;
    spec.m = 6;
    spec.n = 50000;
    spec.epsilon = 0.4;
    spec.noise_on_y = 0.3;
    spec.h_variances = VectorXd::LinSpaced(6, 1.0, 4.0);
    spec.a_values = (VectorXd(6) << 0.6, -0.4, 0.0, 0.3, -0.8, 0.2).finished();
    spec.seed = 8;
    const auto ens = generate(spec);
    const auto z = center_predictions(ens.predictions, ens.moments()).z;
    const VectorXd yc = ens.y.array() - ens.truth.mean_y;
    const double n = static_cast<double>(spec.n);
    for (Index i = 0; i < 6; ++i) {
        const VectorXd prod = z.row(i).transpose().cwiseProduct(yc);
        const double est = prod.mean();
        const double se = std::sqrt((prod.array() - est).square().mean() / n);
        CHECK(std::abs(est - ens.truth.rho(i)) <= 4 * se);
    }
}

TEST_CASE("generate is reproducible and validates its spec")
{
    SyntheticEnsembleSpec spec;
    spec.seed = 99;
    spec.n = 50;
    CHECK(generate(spec).predictions.values() == generate(spec).predictions.values());
    CHECK(generate(spec).y == generate(spec).y);
    SyntheticEnsembleSpec other = spec;
    other.seed = 100;
    CHECK(generate(other).y != generate(spec).y);

    SyntheticEnsembleSpec bad;
    bad.epsilon = -1;
    CHECK_THROWS_AS(generate(bad), InputError);
    bad = {};
    bad.a_values = VectorXd::Constant(10, 2.0); // Σ a²/(g₂ D) = 40 > 1
    CHECK_THROWS_AS(generate(bad), InputError);
    bad = {};
    bad.h_variances = VectorXd::Ones(3);
    CHECK_THROWS_AS(generate(bad), InputError);
}

TEST_CASE("Friedman signals follow their formulas")
{
    SyntheticEnsembleSpec spec;
    spec.signal = SignalKind::Friedman1;
    spec.n = 200000;
    spec.m = 3;
    spec.seed = 4;
    const auto ens = generate(spec);
    const SignalMoments sm = signal_moments(SignalKind::Friedman1);
    // E[g] = 10·E[sin(πx₁x₂)] + 20/12 + 5 + 2.5 with E[sin(πx₁x₂)] = (1/π)∫₀^π (1 − cos t)/t dt.
    double si = 0;
    const int steps = 200000;
    for (int k = 0; k < steps; ++k) {
        const double t = (k + 0.5) * std::numbers::pi / steps;
        si += (1 - std::cos(t)) / t * std::numbers::pi / steps;
    }
    CHECK(sm.mean == doctest::Approx(10 * si / std::numbers::pi + 20.0 / 12 + 7.5).epsilon(1e-9));
    CHECK(ens.truth.var_y == doctest::Approx(sm.variance + 1.0).epsilon(1e-12));
    CHECK(ens.truth.mean_y == doctest::Approx(sm.mean).epsilon(1e-12));
    const double emp_mean = ens.y.mean();
    const double emp_var = (ens.y.array() - emp_mean).square().mean();
    CHECK(std::abs(emp_mean - sm.mean) <= 4 * std::sqrt(emp_var / spec.n));
    CHECK(emp_var == doctest::Approx(ens.truth.var_y).epsilon(0.02));

    for (SignalKind kind : {SignalKind::Friedman2, SignalKind::Friedman3}) {
        spec.signal = kind;
        const auto e = generate(spec);
        const double gm = e.g.mean();
        const double gv = (e.g.array() - gm).square().mean();
        const SignalMoments s = signal_moments(kind);
        CHECK(gv == doctest::Approx(s.variance).epsilon(0.03));
        CHECK(e.truth.var_y == doctest::Approx(s.variance * (1 + 1.0 / 9)).epsilon(1e-12));
    }
    CHECK(parse_signal("friedman2") == SignalKind::Friedman2);
    CHECK_THROWS_AS(parse_signal("friedman4"), InputError);
}

TEST_CASE("eigen expansion at epsilon = 0 and in closed form")
{
    const Index m = 5;
    const double g2 = 1.3;
    const auto e0 = top_eigenpairs(SymMatrix<double>::from_upper(model_covariance(g2, VectorXd::Zero(m), VectorXd::Ones(m), 0.0)), 1);
    CHECK(e0.value(0) == doctest::Approx(g2 * m).epsilon(1e-14));
    CHECK((e0.vector(0) - VectorXd::Constant(m, 1 / std::sqrt(5.0))).norm() <= 1e-14);

    const double sigma2 = 2.0;
    const std::vector<double> eps{0.001, 0.01, 0.1};
    const auto r = check_eigen_expansion(g2, VectorXd::Zero(m), VectorXd::Constant(m, sigma2), eps);
    for (std::size_t k = 0; k < eps.size(); ++k)
        CHECK(r.lambda_errors[k] == doctest::Approx(eps[k] * eps[k] * sigma2).epsilon(1e-6));
    CHECK(r.lambda_slope == doctest::Approx(2.0).epsilon(1e-4));
    CHECK_THROWS_AS(check_eigen_expansion(g2, VectorXd::Zero(m), VectorXd::Ones(m), std::vector<double>{0.2}),
                    InputError);
}

TEST_CASE("loglog_slope")
{
    const std::vector<double> x{1, 2, 4, 8};
    const std::vector<double> y{3, 12, 48, 192};
    CHECK(loglog_slope(x, y) == doctest::Approx(2.0));
    const std::vector<double> zeros{0, 0, 0, 0};
    CHECK(std::isnan(loglog_slope(x, zeros)));
}
