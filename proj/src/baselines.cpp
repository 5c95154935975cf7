#include "upcr/baselines.hpp"

#include <algorithm>
#include <sstream>
#include <vector>

namespace upcr
{

VectorXd ensemble_mean(const PredictionMatrix &preds)
{
    return preds.values().colwise().mean().transpose();
}

VectorXd ensemble_median(const PredictionMatrix &preds)
{
    const Index m = preds.num_regressors();
    const Index n = preds.num_samples();
    VectorXd out(n);
    std::vector<double> column(static_cast<std::size_t>(m));
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < m; ++i) {
            column[static_cast<std::size_t>(i)] = preds.values()(i, j);
        }
        std::sort(column.begin(), column.end());
        const auto half = static_cast<std::size_t>(m / 2);
        out(j) = (m % 2 == 1) ? column[half] : 0.5 * (column[half - 1] + column[half]);
    }
    return out;
}

OracleWeights oracle_weights(const MatrixXd &z, const VectorXd &y, const ResponseMoments &moments)
{
    if (z.cols() != y.size()) {
        throw InputError("oracle: number of labels does not match number of samples");
    }
    const VectorXd target = y.array() - moments.mean_y();
    const auto sol = least_squares(z.transpose(), target);
    return {sol.x, sol.rank_deficient};
}

VectorXd linear_ensemble_predict(const MatrixXd &z, const VectorXd &weights, const ResponseMoments &moments)
{
    return (z.transpose() * weights).array() + moments.mean_y();
}

SymMatrix<double> misfit_covariance(const PredictionMatrix &preds, const VectorXd &y)
{
    if (preds.num_samples() != y.size()) {
        throw InputError("misfit covariance: number of labels does not match number of samples");
    }
    const MatrixXd misfit = preds.values().rowwise() - y.transpose();
    const MatrixXd c = misfit * misfit.transpose() / static_cast<double>(y.size());
    return SymMatrix<double>::from_upper(c);
}

VectorXd gem_weights(const SymMatrix<double> &c_star, double max_condition)
{
    const EigenPairs<double> eig = jacobi_eigen(c_star);
    const double lmax = eig.values(0);
    const double lmin = eig.values(eig.size() - 1);
    if (!(lmin > 0) || lmax / lmin > max_condition) {
        std::ostringstream msg;
        msg << "GEM: misfit covariance is ill-conditioned (eigenvalues " << lmax << " .. " << lmin << ")";
        throw NumericalError(msg.str());
    }
    const VectorXd ones = VectorXd::Ones(c_star.dim());
    const VectorXd row_sums = eig.vectors * (eig.values.cwiseInverse().asDiagonal() * (eig.vectors.transpose() * ones));
    return row_sums / row_sums.sum();
}

const char *to_string(DifficultyBand band)
{
    switch (band) {
    case DifficultyBand::Easy: return "easy";
    case DifficultyBand::Challenging: return "challenging";
    case DifficultyBand::Hard: return "hard";
    }
    return "hard";
}

DifficultyBand difficulty_band(double normalized_mse)
{
    if (normalized_mse < 0.1) {
        return DifficultyBand::Easy;
    }
    if (normalized_mse < 0.8) {
        return DifficultyBand::Challenging;
    }
    return DifficultyBand::Hard;
}

Evaluation evaluate(const VectorXd &y_hat, const VectorXd &y, const ResponseMoments &moments)
{
    if (y_hat.size() != y.size() || y.size() == 0) {
        throw InputError("evaluate: prediction and label vectors must have the same non-zero length");
    }
    Evaluation e;
    e.mse = (y_hat - y).squaredNorm() / static_cast<double>(y.size());
    e.normalized_mse = e.mse / moments.var_y();
    e.band = difficulty_band(e.normalized_mse);
    return e;
}

} // namespace upcr
