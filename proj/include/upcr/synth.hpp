#ifndef UPCR_SYNTH_HPP
#define UPCR_SYNTH_HPP

/** @file
 * Synthetic ensembles under the model f_i = g + ε h_i with uncorrelated
 * deviations, plus numerical checks of the first-order eigen-perturbation
 * expansion and of the √n consistency of ρ̂ at known g₂.
 *
 * Deviation construction: h_i = (a_i / g₂) g_c + r_i, where g_c is the
 * centred signal and r has covariance diag(D) − aaᵀ/g₂. That makes
 * E[h_i h_j] = 0 for i ≠ j, E[h_i²] = D_ii and E[h_i Y] = a_i exactly, so the
 * population covariance is g₂𝟙𝟙ᵀ + ε(a𝟙ᵀ + 𝟙aᵀ) + ε²D. It requires
 * Σ a_i² / (g₂ D_ii) ≤ 1; with a = 0 the r_i are independent draws.
 */

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "upcr/model.hpp"

namespace upcr
{

enum class SignalKind
{
    Normal,    // √g₂ · N(0, 1)
    Friedman1, // 10 sin(π x1 x2) + 20 (x3 − .5)² + 10 x4 + 5 x5, x ~ U[0,1]^5
    Friedman2, // sqrt(x1² + (x2 x3 − 1/(x2 x4))²)
    Friedman3, // atan((x2 x3 − 1/(x2 x4)) / x1)
};

const char *to_string(SignalKind kind);
SignalKind parse_signal(const std::string &text);

struct SyntheticEnsembleSpec
{
    Index m = 10;
    Index n = 1000;
    SignalKind signal = SignalKind::Normal;
    double g2 = 1.0;     // signal variance for SignalKind::Normal
    double mean_y = 0.0; // response mean for SignalKind::Normal
    double epsilon = 0.1;
    VectorXd h_variances;             // D_ii; empty means all ones
    VectorXd a_values;                // a_i = E[h_i Y]; empty means zeros
    std::optional<double> noise_on_y; // var(Y − g); default 0 (normal), 1 (#1), var(g)/9 (#2, #3)
    std::uint64_t seed = 0;

    /// Throws InputError when the spec cannot be realised.
    void validate() const;
};

struct SyntheticTruth
{
    double g2 = 0;
    double mean_y = 0;
    double var_y = 0;
    double epsilon = 0;
    VectorXd a;
    VectorXd d;
    VectorXd rho;          // g₂𝟙 + εa
    MatrixXd c_population; // g₂𝟙𝟙ᵀ + ε(a𝟙ᵀ + 𝟙aᵀ) + ε²D
};

struct SyntheticEnsemble
{
    PredictionMatrix predictions;
    VectorXd y;
    VectorXd g; // conditional mean g(x_j), uncentred
    SyntheticTruth truth;

    ResponseMoments moments() const { return {truth.mean_y, truth.var_y}; }
};

/// Reproducible for a fixed spec: the signal and each expert draw from their own seeded stream.
SyntheticEnsemble generate(const SyntheticEnsembleSpec &spec);

/// g₂𝟙𝟙ᵀ + ε(a𝟙ᵀ + 𝟙aᵀ) + ε² diag(d).
MatrixXd model_covariance(double g2, const VectorXd &a, const VectorXd &d, double epsilon);

struct SignalMoments
{
    double mean = 0;
    double variance = 0;
};

/// Population mean/variance of g by tensor Gauss-Legendre quadrature (Friedman kinds).
SignalMoments signal_moments(SignalKind kind, double normal_g2 = 1.0, double normal_mean = 0.0);

/// Default var(Y − g) for @p kind.
double default_noise_variance(SignalKind kind, double signal_variance);

struct ExpansionReport
{
    std::vector<double> epsilons;
    std::vector<double> lambda_errors;
    std::vector<double> eigvec_errors;
    double lambda_slope = 0;  // NaN when every error is zero
    double eigvec_slope = 0;  // NaN when every error is zero
};

/**
 * Compares the leading eigenpair of model_covariance(g2, a, d, ε) with its
 * first-order expansion λ ≈ g₂m + 2(aᵀ𝟙)ε, v ∝ g₂𝟙 + (a − (aᵀ𝟙/m)𝟙)ε and
 * fits log(error) against log(ε). Every ε must lie in (0, 0.1].
 */
ExpansionReport check_eigen_expansion(double g2, const VectorXd &a, const VectorXd &d, std::span<const double> epsilons);

/// Least-squares slope of log(errors) on log(xs), ignoring zero errors.
double loglog_slope(std::span<const double> xs, std::span<const double> errors);

/// ‖ρ̂ − ρ‖ when the true g₂ is plugged into the additive fit.
double rho_error_at_true_g2(const SyntheticEnsemble &ens, Loss loss = Loss::Squared);

} // namespace upcr

#endif // UPCR_SYNTH_HPP
