#ifndef UPCR_BASELINES_HPP
#define UPCR_BASELINES_HPP

// Reference aggregators and scoring. The oracle and GEM need labels and are
// only meant for evaluation.

#include "upcr/linalg.hpp"
#include "upcr/model.hpp"

namespace upcr
{

VectorXd ensemble_mean(const PredictionMatrix &preds);

/// Column-wise median; for even m the midpoint of the two central values.
VectorXd ensemble_median(const PredictionMatrix &preds);

struct OracleWeights
{
    VectorXd weights;
    bool rank_deficient = false;
};

/// Least-squares weights (ZZᵀ)⁻¹Z(y − μ_Y); minimum-norm when ZZᵀ is singular.
OracleWeights oracle_weights(const MatrixXd &z, const VectorXd &y, const ResponseMoments &moments);

/// μ_Y + Zᵀw.
VectorXd linear_ensemble_predict(const MatrixXd &z, const VectorXd &weights, const ResponseMoments &moments);

/// C*_ij = (1/n) Σ_k (f_i(x_k) − y_k)(f_j(x_k) − y_k).
SymMatrix<double> misfit_covariance(const PredictionMatrix &preds, const VectorXd &y);

/**
 * GEM weights C*⁻¹𝟙 / 𝟙ᵀC*⁻¹𝟙. Throws NumericalError when C* is not
 * positive definite or its condition number exceeds @p max_condition.
 */
VectorXd gem_weights(const SymMatrix<double> &c_star, double max_condition = 1e12);

enum class DifficultyBand
{
    Easy,
    Challenging,
    Hard,
};

const char *to_string(DifficultyBand band);

/// < 0.1 easy, [0.1, 0.8) challenging, ≥ 0.8 hard.
DifficultyBand difficulty_band(double normalized_mse);

struct Evaluation
{
    double mse = 0;
    double normalized_mse = 0;
    DifficultyBand band = DifficultyBand::Easy;
};

Evaluation evaluate(const VectorXd &y_hat, const VectorXd &y, const ResponseMoments &moments);

} // namespace upcr

#endif // UPCR_BASELINES_HPP
