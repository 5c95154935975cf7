#ifndef UPCR_MODEL_HPP
#define UPCR_MODEL_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "upcr/linalg.hpp"

namespace upcr
{

using VectorXd = Eigen::VectorXd;
using MatrixXd = Eigen::MatrixXd;

/**
 * The observed m×n matrix of expert predictions: values(i, j) = f_i(x_j).
 * Regressor names and sample ids are unique; every entry is finite.
 */
class PredictionMatrix
{
public:
    PredictionMatrix(std::vector<std::string> regressor_names, std::vector<std::string> sample_ids,
                     MatrixXd values);

    /// Convenience constructor with generated names ("f0", "f1", ...) and ids ("0", "1", ...).
    explicit PredictionMatrix(MatrixXd values);

    Index num_regressors() const { return values_.rows(); }
    Index num_samples() const { return values_.cols(); }

    const std::vector<std::string> &regressor_names() const { return names_; }
    const std::vector<std::string> &sample_ids() const { return ids_; }
    const MatrixXd &values() const { return values_; }

    /// Row index of @p name, or nullopt.
    std::optional<Index> find_regressor(const std::string &name) const;

    /// Sub-ensemble made of the listed rows, in the given order.
    PredictionMatrix select_rows(std::span<const Index> rows) const;

private:
    std::vector<std::string> names_;
    std::vector<std::string> ids_;
    MatrixXd values_;
};

/// The two response moments assumed known: E[Y] and var(Y) > 0.
class ResponseMoments
{
public:
    ResponseMoments(double mean_y, double var_y);

    double mean_y() const { return mean_y_; }
    double var_y() const { return var_y_; }

private:
    double mean_y_;
    double var_y_;
};

/// Row-centred predictions Z_ij = f_i(x_j) − b̂_i − μ_Y.
struct CenteredData
{
    MatrixXd z;
    VectorXd bias_estimates;
    VectorXd regressor_means;
};

/**
 * One-parameter family of covariance estimates indexed by the assumed g₂ = q.
 * Holds the offsets fitted at q = 0; everything else follows in closed form.
 */
class RhoFamily
{
public:
    RhoFamily(VectorXd a0, double var_y);

    const VectorXd &a0() const { return a0_; }
    double var_y() const { return var_y_; }
    Index size() const { return a0_.size(); }

    /// ρ̂(q) = â(0) + q/2. Requires 0 ≤ q ≤ var_y.
    VectorXd rho(double q) const;

    /// â(q) = â(0) − q/2. Requires 0 ≤ q ≤ var_y.
    VectorXd offsets(double q) const;

private:
    void check_domain(double q) const;

    VectorXd a0_;
    double var_y_;
};

enum class Loss
{
    Squared,
    Absolute,
};

struct PipelineConfig
{
    Loss loss = Loss::Squared;
    int grid_points = 201;
    double eps_l = 0.1;
    double prune_abs_frac = 0.05;
    double prune_rel_frac = 1.0 / 3.0;
    double two_pc_trace_frac = 0.1;
    int min_ensemble_size = 5;

    /// Throws InputError on out-of-range fields.
    void validate() const;
};

enum class Difficulty
{
    Hard,
    Tractable,
};

/// Where in the pipeline a Hard verdict was reached.
enum class HardStage
{
    None,
    BeforePrune,
    NothingKept,
    AfterRecompute,
};

/// Which pruning threshold removed a regressor.
enum class PruneRule
{
    Kept,
    Absolute,
    Relative,
    Both,
};

/**
 * A sample of the normalised residual curve RES(q) used for selecting ĝ₂.
 * `degenerate` marks grid points where ‖ρ̂(q)‖ vanished.
 */
struct ResidualPoint
{
    double q = 0;
    double res = 0;
    bool degenerate = false;
};

struct ResidualCurve
{
    std::vector<ResidualPoint> points;
    /// ρ̂(q) is parallel to v₁ at every non-degenerate grid point.
    bool collinear = false;
    /// RES stays small and within a small factor of its minimum over the whole grid,
    /// so the argmin is set by sampling noise. Implied by `collinear`.
    bool flat = false;
};

struct G2Estimate
{
    double g2_hat = 0;
    double res_min = 0;
    bool from_eigenvalue_fallback = false;
};

/**
 * Result of fitting the unsupervised ensemble.
 *
 * Indices in `kept` refer to rows of the training PredictionMatrix. Vectors
 * named "over kept" are aligned with `kept`; `mse_estimates`, `rho_hat_all`,
 * `prune_rules`, `bias_estimates` and `regressor_means` cover all m rows.
 */
struct FittedEnsemble
{
    std::vector<std::string> regressor_names;
    Difficulty difficulty = Difficulty::Hard;
    HardStage hard_stage = HardStage::None;

    std::vector<Index> kept;
    std::vector<PruneRule> prune_rules;
    std::optional<VectorXd> weights; // over kept

    double g2_hat = 0;
    bool g2_from_fallback = false;
    double initial_g2_hat = 0;

    EigenPairs<double> eigen;
    double trace = 0;
    bool used_two_pcs = false;
    bool used_fallback_average = false;

    VectorXd rho_hat;       // first-pass ρ̂(ĝ₂) over kept
    VectorXd rho_hat_all;   // first-pass ρ̂(ĝ₂) over all m
    VectorXd refit_rho_hat; // ρ̂ recomputed on the kept set (empty if no refit)
    VectorXd mse_estimates;

    ResidualCurve initial_curve;
    ResidualCurve curve;

    VectorXd bias_estimates;
    VectorXd regressor_means;
    double mean_y = 0;
    double var_y = 1;

    bool tractable() const { return difficulty == Difficulty::Tractable; }
    std::vector<std::string> kept_names() const;
};

const char *to_string(Loss loss);
const char *to_string(Difficulty d);
const char *to_string(HardStage s);
const char *to_string(PruneRule r);
Loss parse_loss(const std::string &text);

} // namespace upcr

#endif // UPCR_MODEL_HPP
