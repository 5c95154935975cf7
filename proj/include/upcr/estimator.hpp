#ifndef UPCR_ESTIMATOR_HPP
#define UPCR_ESTIMATOR_HPP

/** @file
 * Unsupervised principal component regression (U-PCR).
 *
 * Given only an m×n matrix of expert predictions and the mean and variance
 * of the response, the pipeline
 *   1. centres every expert on its empirical mean,
 *   2. fits the additive model Ĉ_ij ≈ q + a_i + a_j on the off-diagonal
 *      covariance entries, which yields the family ρ̂(q) = â(0) + q/2,
 *   3. picks ĝ₂ as the q whose ρ̂(q) is best aligned with the leading
 *      eigenvector of Ĉ,
 *   4. stops if ĝ₂ is a small fraction of var(Y), otherwise prunes weak
 *      experts, refits on the survivors and projects ρ̂ onto the top one or
 *      two eigenvectors to obtain the ensemble weights.
 */

#include <vector>

#include "upcr/linalg.hpp"
#include "upcr/model.hpp"

namespace upcr
{

/// b̂_i = mean_j f_i(x_j) − μ_Y and Z = f − b̂ − μ_Y. Requires n ≥ 2.
CenteredData center_predictions(const PredictionMatrix &preds, const ResponseMoments &moments);

/**
 * Minimiser over a of Σ_{i<j} L(Ĉ_ij − q − a_i − a_j). Only off-diagonal
 * entries are read. Requires m ≥ 3, otherwise the offsets are not identifiable.
 *
 * The absolute loss is solved by iteratively reweighted least squares on a
 * smoothed |r|, followed by a vertex polish that solves exactly on the m
 * smallest independent residuals when that does not increase the objective.
 */
VectorXd fit_additive_offsets(const SymMatrix<double> &c_hat, double q, Loss loss);

/// Sum of L(Ĉ_ij − q − a_i − a_j) over i < j.
double additive_objective(const SymMatrix<double> &c_hat, double q, const VectorXd &a, Loss loss);

/// Offsets at q = 0 packaged with the grid bound var_y.
RhoFamily make_rho_family(const SymMatrix<double> &c_hat, double var_y, Loss loss);

/// ρ̂(q) from the family; see RhoFamily::rho.
inline VectorXd rho_of_q(const RhoFamily &family, double q)
{
    return family.rho(q);
}

/// A curve is flat when every regular point has RES ≤ kFlatResCeiling and RES ≤ kFlatResRatio · min RES.
inline constexpr double kFlatResCeiling = 0.1;
inline constexpr double kFlatResRatio = 3.0;

/**
 * RES(q) = ‖ρ̂(q) − (v₁ᵀρ̂(q)) v₁‖ / ‖ρ̂(q)‖ on `grid_points` uniform samples of
 * [0, var_y], both endpoints included.
 */
ResidualCurve residual_curve(const RhoFamily &family, const VectorXd &v1, int grid_points);

/**
 * Grid argmin of RES, ties to the smallest q. A collinear or flat curve carries
 * no information about g₂, so λ₁/m (clamped to [0, var_y]) is returned instead.
 */
G2Estimate estimate_g2(const ResidualCurve &curve, double lambda1, Index m, double var_y);

/// MSE_i = var(Y) − 2ρ̂_i + Ĉ_ii, unclamped.
VectorXd estimate_regressor_mse(const VectorXd &rho_hat, const SymMatrix<double> &c_hat,
                                const ResponseMoments &moments);

struct PruneResult
{
    std::vector<Index> kept;
    std::vector<PruneRule> rules; // one per input regressor

    bool empty() const { return kept.empty(); }
};

/// Keeps i iff ρ̂_i ≥ prune_abs_frac·var_y and ρ̂_i ≥ prune_rel_frac·max ρ̂.
PruneResult prune_regressors(const VectorXd &rho_hat, const ResponseMoments &moments,
                             const PipelineConfig &cfg);

struct WeightResult
{
    VectorXd weights;
    bool used_two_pcs = false;
};

/// w = (v₁ᵀρ̂/λ₁) v₁, plus the second component when λ₂ > two_pc_trace_frac·trace.
WeightResult compute_weights(const EigenPairs<double> &eigen, const VectorXd &rho_hat, double trace,
                             const PipelineConfig &cfg);

/// Runs the full pipeline. Requires m ≥ 3 and n ≥ 2.
FittedEnsemble upcr_fit(const PredictionMatrix &preds, const ResponseMoments &moments,
                        const PipelineConfig &cfg = {});

/**
 * ŷ_j = μ_Y + Σ_{i ∈ kept} w_i (f_i(x_j) − μ̂_i). Regressors are matched by
 * name, so @p preds may contain extra rows or a different row order.
 */
VectorXd predict(const FittedEnsemble &fit, const PredictionMatrix &preds);

} // namespace upcr

#endif // UPCR_ESTIMATOR_HPP
