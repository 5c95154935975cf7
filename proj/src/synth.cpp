#include "upcr/synth.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include "upcr/estimator.hpp"
#include "upcr/linalg.hpp"

namespace upcr
{

namespace
{

using std::numbers::pi;

std::mt19937_64 make_stream(std::uint64_t seed, std::uint32_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
    return std::mt19937_64(seq);
}

// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n)
{
    std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = 0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1);
            const double step = p0 / dp;
            z -= step;
            if (std::abs(step) < 1e-15) {
                break;
            }
        }
        x[static_cast<std::size_t>(i)] = -z;
        x[static_cast<std::size_t>(n - 1 - i)] = z;
        w[static_cast<std::size_t>(i)] = 2 / ((1 - z * z) * dp * dp);
        w[static_cast<std::size_t>(n - 1 - i)] = w[static_cast<std::size_t>(i)];
    }
    return {x, w};
}

struct Box
{
    double lo;
    double hi;
    int nodes;
};

// E[f] and E[f²] for X uniform on the given box, by tensor Gauss-Legendre.
template <std::size_t D>
std::pair<double, double> box_moments(const std::array<Box, D> &box,
                                      const std::function<double(const std::array<double, D> &)> &f)
{
    std::array<std::vector<double>, D> xs, ws;
    for (std::size_t d = 0; d < D; ++d) {
        auto [x, w] = gauss_legendre(box[d].nodes);
        const double half = 0.5 * (box[d].hi - box[d].lo);
        const double mid = 0.5 * (box[d].hi + box[d].lo);
        for (std::size_t k = 0; k < x.size(); ++k) {
            x[k] = mid + half * x[k];
            w[k] *= 0.5; // weights now sum to 1 on each axis
        }
        xs[d] = std::move(x);
        ws[d] = std::move(w);
    }
    double s1 = 0, s2 = 0;
    std::array<std::size_t, D> idx{};
    std::array<double, D> point{};
    while (true) {
        double weight = 1;
        for (std::size_t d = 0; d < D; ++d) {
            point[d] = xs[d][idx[d]];
            weight *= ws[d][idx[d]];
        }
        const double v = f(point);
        s1 += weight * v;
        s2 += weight * v * v;
        std::size_t d = 0;
        while (d < D && ++idx[d] == xs[d].size()) {
            idx[d] = 0;
            ++d;
        }
        if (d == D) {
            break;
        }
    }
    return {s1, s2};
}

double friedman2(double x1, double x2, double x3, double x4)
{
    const double t = x2 * x3 - 1.0 / (x2 * x4);
    return std::sqrt(x1 * x1 + t * t);
}

double friedman3(double x1, double x2, double x3, double x4)
{
    return std::atan((x2 * x3 - 1.0 / (x2 * x4)) / x1);
}

constexpr std::array<Box, 4> friedman23_box(int n1, int n2, int n3, int n4)
{
    return {Box{0.0, 100.0, n1}, Box{40 * pi, 560 * pi, n2}, Box{0.0, 1.0, n3}, Box{1.0, 11.0, n4}};
}

// One draw of g(x) for the given signal.
double draw_signal(SignalKind kind, double normal_scale, std::mt19937_64 &rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    switch (kind) {
    case SignalKind::Normal: {
        std::normal_distribution<double> z(0.0, 1.0);
        return normal_scale * z(rng);
    }
    case SignalKind::Friedman1: {
        const double x1 = u(rng), x2 = u(rng), x3 = u(rng), x4 = u(rng), x5 = u(rng);
        return 10 * std::sin(pi * x1 * x2) + 20 * (x3 - 0.5) * (x3 - 0.5) + 10 * x4 + 5 * x5;
    }
    case SignalKind::Friedman2:
    case SignalKind::Friedman3: {
        const double x1 = 100 * u(rng);
        const double x2 = 40 * pi + 520 * pi * u(rng);
        const double x3 = u(rng);
        const double x4 = 1 + 10 * u(rng);
        return kind == SignalKind::Friedman2 ? friedman2(x1, x2, x3, x4) : friedman3(x1, x2, x3, x4);
    }
    }
    return 0;
}

// Lower-triangular F with F Fᵀ = diag(d) − aaᵀ/g₂.
MatrixXd deviation_factor(const VectorXd &a, const VectorXd &d, double g2)
{
    const Index m = d.size();
    if (a.isZero(0)) {
        return d.cwiseSqrt().asDiagonal();
    }
    MatrixXd cov = MatrixXd(d.asDiagonal()) - a * a.transpose() / g2;
    Eigen::LLT<MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) {
        return llt.matrixL();
    }
    // Semidefinite boundary: symmetric square root instead.
    const EigenPairs<double> eig = jacobi_eigen(SymMatrix<double>::from_upper(cov));
    MatrixXd f = MatrixXd::Zero(m, m);
    for (Index k = 0; k < m; ++k) {
        f += std::sqrt(std::max(0.0, eig.values(k))) * eig.vectors.col(k) * eig.vectors.col(k).transpose();
    }
    return f;
}

} // namespace

const char *to_string(SignalKind kind)
{
    switch (kind) {
    case SignalKind::Normal: return "normal";
    case SignalKind::Friedman1: return "friedman1";
    case SignalKind::Friedman2: return "friedman2";
    case SignalKind::Friedman3: return "friedman3";
    }
    return "normal";
}

SignalKind parse_signal(const std::string &text)
{
    if (text == "normal") return SignalKind::Normal;
    if (text == "friedman1") return SignalKind::Friedman1;
    if (text == "friedman2") return SignalKind::Friedman2;
    if (text == "friedman3") return SignalKind::Friedman3;
    throw InputError("unknown signal '" + text + "' (expected normal|friedman1|friedman2|friedman3)");
}

void SyntheticEnsembleSpec::validate() const
{
    if (m < 1 || n < 2) {
        throw InputError("synthetic spec needs m >= 1 and n >= 2");
    }
    if (!(epsilon >= 0) || !std::isfinite(epsilon)) {
        throw InputError("epsilon must be finite and non-negative");
    }
    if (signal == SignalKind::Normal && (!(g2 > 0) || !std::isfinite(g2))) {
        throw InputError("g2 must be finite and positive");
    }
    if (h_variances.size() != 0 && h_variances.size() != m) {
        throw InputError("h_variances must have m entries");
    }
    if (a_values.size() != 0 && a_values.size() != m) {
        throw InputError("a_values must have m entries");
    }
    if (h_variances.size() != 0 && (h_variances.array() < 0).any()) {
        throw InputError("h_variances must be non-negative");
    }
    if (noise_on_y && !(*noise_on_y >= 0)) {
        throw InputError("noise_on_y must be non-negative");
    }
}

SignalMoments signal_moments(SignalKind kind, double normal_g2, double normal_mean)
{
    switch (kind) {
    case SignalKind::Normal:
        return {normal_mean, normal_g2};
    case SignalKind::Friedman1: {
        // Terms are independent: sin part by quadrature, the rest in closed form.
        const std::array<Box, 2> box{Box{0, 1, 64}, Box{0, 1, 64}};
        const auto [s1, s2] = box_moments<2>(box, [](const std::array<double, 2> &x) {
            return 10 * std::sin(pi * x[0] * x[1]);
        });
        const double mean = s1 + 20.0 / 12.0 + 5.0 + 2.5;
        const double var = (s2 - s1 * s1) + 400.0 / 180.0 + 100.0 / 12.0 + 25.0 / 12.0;
        return {mean, var};
    }
    case SignalKind::Friedman2: {
        const auto [s1, s2] = box_moments<4>(friedman23_box(24, 24, 24, 24), [](const std::array<double, 4> &x) {
            return friedman2(x[0], x[1], x[2], x[3]);
        });
        return {s1, s2 - s1 * s1};
    }
    case SignalKind::Friedman3: {
        const auto [s1, s2] = box_moments<4>(friedman23_box(64, 32, 64, 16), [](const std::array<double, 4> &x) {
            return friedman3(x[0], x[1], x[2], x[3]);
        });
        return {s1, s2 - s1 * s1};
    }
    }
    return {};
}

double default_noise_variance(SignalKind kind, double signal_variance)
{
    switch (kind) {
    case SignalKind::Normal: return 0.0;
    case SignalKind::Friedman1: return 1.0;
    case SignalKind::Friedman2:
    case SignalKind::Friedman3: return signal_variance / 9.0; // 3-to-1 signal-to-noise (std ratio)
    }
    return 0.0;
}

MatrixXd model_covariance(double g2, const VectorXd &a, const VectorXd &d, double epsilon)
{
    const Index m = a.size();
    const VectorXd ones = VectorXd::Ones(m);
    MatrixXd c = g2 * ones * ones.transpose() + epsilon * (a * ones.transpose() + ones * a.transpose());
    c.diagonal() += epsilon * epsilon * d;
    return c;
}

SyntheticEnsemble generate(const SyntheticEnsembleSpec &spec)
{
    spec.validate();
    const Index m = spec.m;
    const Index n = spec.n;
    const VectorXd d = spec.h_variances.size() ? spec.h_variances : VectorXd::Ones(m);
    const VectorXd a = spec.a_values.size() ? spec.a_values : VectorXd::Zero(m);

    const SignalMoments sm = signal_moments(spec.signal, spec.g2, spec.mean_y);
    const double g2 = sm.variance;
    const double noise = spec.noise_on_y.value_or(default_noise_variance(spec.signal, g2));

    if (!a.isZero(0)) {
        const double load = (a.array().square() / (g2 * d.array())).sum();
        if (!(load <= 1.0 + 1e-12)) {
            std::ostringstream msg;
            msg << "a_values too large for uncorrelated deviations: sum a_i^2/(g2 D_ii) = " << load << " > 1";
            throw InputError(msg.str());
        }
    }
    const MatrixXd factor = deviation_factor(a, d, g2);
    const VectorXd alpha = a / g2;

    auto signal_rng = make_stream(spec.seed, 0);
    std::normal_distribution<double> std_normal(0.0, 1.0);
    const double normal_scale = std::sqrt(spec.g2);

    VectorXd g(n), g_c(n), y(n);
    for (Index j = 0; j < n; ++j) {
        g(j) = spec.signal == SignalKind::Normal ? spec.mean_y + draw_signal(spec.signal, normal_scale, signal_rng)
                                                 : draw_signal(spec.signal, normal_scale, signal_rng);
        g_c(j) = g(j) - sm.mean;
        y(j) = g(j) + std::sqrt(noise) * std_normal(signal_rng);
    }

    MatrixXd iid(m, n);
    for (Index i = 0; i < m; ++i) {
        auto rng = make_stream(spec.seed, static_cast<std::uint32_t>(i + 1));
        for (Index j = 0; j < n; ++j) {
            iid(i, j) = std_normal(rng);
        }
    }
    const MatrixXd residual = factor * iid;

    MatrixXd f(m, n);
    for (Index i = 0; i < m; ++i) {
        const VectorXd h = alpha(i) * g_c + residual.row(i).transpose();
        f.row(i) = (g + spec.epsilon * h).transpose();
    }

    SyntheticTruth truth;
    truth.g2 = g2;
    truth.mean_y = sm.mean;
    truth.var_y = g2 + noise;
    truth.epsilon = spec.epsilon;
    truth.a = a;
    truth.d = d;
    truth.rho = g2 + spec.epsilon * a.array();
    truth.c_population = model_covariance(g2, a, d, spec.epsilon);

    return SyntheticEnsemble{PredictionMatrix(std::move(f)), std::move(y), std::move(g), std::move(truth)};
}

double loglog_slope(std::span<const double> xs, std::span<const double> errors)
{
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        if (errors[k] > 0) {
            const double lx = std::log(xs[k]);
            const double ly = std::log(errors[k]);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
            ++count;
        }
    }
    if (count < 2) {
        return std::nan("");
    }
    return (count * sxy - sx * sy) / (count * sxx - sx * sx);
}

ExpansionReport check_eigen_expansion(double g2, const VectorXd &a, const VectorXd &d, std::span<const double> epsilons)
{
    if (a.size() != d.size() || a.size() < 2) {
        throw InputError("check_eigen_expansion: a and d must have the same length >= 2");
    }
    const Index m = a.size();
    const double a_sum = a.sum();
    const VectorXd first_order = a.array() - a_sum / static_cast<double>(m);

    ExpansionReport report;
    for (double eps : epsilons) {
        if (!(eps > 0 && eps <= 0.1)) {
            throw InputError("check_eigen_expansion: epsilons must lie in (0, 0.1]");
        }
        const auto c = SymMatrix<double>::from_upper(model_covariance(g2, a, d, eps));
        const EigenPairs<double> top = top_eigenpairs(c, 1);
        const double lambda_pred = g2 * static_cast<double>(m) + 2.0 * a_sum * eps;
        const VectorXd v_pred = (g2 * VectorXd::Ones(m) + eps * first_order).normalized();
        report.epsilons.push_back(eps);
        report.lambda_errors.push_back(std::abs(top.value(0) - lambda_pred));
        report.eigvec_errors.push_back((top.vector(0) - v_pred).norm());
    }
    report.lambda_slope = loglog_slope(report.epsilons, report.lambda_errors);
    report.eigvec_slope = loglog_slope(report.epsilons, report.eigvec_errors);
    return report;
}

double rho_error_at_true_g2(const SyntheticEnsemble &ens, Loss loss)
{
    const CenteredData centered = center_predictions(ens.predictions, ens.moments());
    const SymMatrix<double> c_hat = sample_covariance(centered.z);
    const VectorXd a_hat = fit_additive_offsets(c_hat, ens.truth.g2, loss);
    const VectorXd rho_hat = a_hat.array() + ens.truth.g2;
    return (rho_hat - ens.truth.rho).norm();
}

} // namespace upcr
