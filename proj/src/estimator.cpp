#include "upcr/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace upcr
{

namespace
{

struct PairDesign
{
    std::vector<std::pair<Index, Index>> pairs;
    MatrixXd design; // one row e_i + e_j per pair
    VectorXd offdiag;
};

PairDesign make_pair_design(const SymMatrix<double> &c_hat)
{
    const Index m = c_hat.dim();
    PairDesign d;
    const Index count = m * (m - 1) / 2;
    d.design = MatrixXd::Zero(count, m);
    d.offdiag.resize(count);
    Index row = 0;
    for (Index i = 0; i < m; ++i) {
        for (Index j = i + 1; j < m; ++j, ++row) {
            d.pairs.emplace_back(i, j);
            d.design(row, i) = 1.0;
            d.design(row, j) = 1.0;
            d.offdiag(row) = c_hat(i, j);
        }
    }
    return d;
}

double l1(const VectorXd &r)
{
    return r.cwiseAbs().sum();
}

// Solves exactly on the m smallest-residual pairs whose rows are independent.
// Returns nothing if no such basis exists.
std::optional<VectorXd> vertex_polish(const PairDesign &d, const VectorXd &target, const VectorXd &residual)
{
    const Index m = d.design.cols();
    std::vector<Index> order(static_cast<std::size_t>(residual.size()));
    std::iota(order.begin(), order.end(), Index(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](Index x, Index y) { return std::abs(residual(x)) < std::abs(residual(y)); });

    std::vector<VectorXd> basis;
    std::vector<Index> chosen;
    for (Index k : order) {
        VectorXd row = d.design.row(k).transpose();
        VectorXd rem = row;
        for (const auto &q : basis) {
            rem -= q.dot(rem) * q;
        }
        if (rem.norm() > 1e-9 * row.norm()) {
            basis.push_back(rem.normalized());
            chosen.push_back(k);
            if (static_cast<Index>(chosen.size()) == m) {
                break;
            }
        }
    }
    if (static_cast<Index>(chosen.size()) < m) {
        return std::nullopt;
    }
    MatrixXd b(m, m);
    VectorXd rhs(m);
    for (Index k = 0; k < m; ++k) {
        b.row(k) = d.design.row(chosen[static_cast<std::size_t>(k)]);
        rhs(k) = target(chosen[static_cast<std::size_t>(k)]);
    }
    return VectorXd(b.fullPivLu().solve(rhs));
}

VectorXd fit_absolute(const PairDesign &d, const VectorXd &target, double scale)
{
    const double delta = 1e-6 * scale;
    VectorXd a = least_squares(d.design, target).x;

    auto smoothed = [&](const VectorXd &r) { return (r.array().square() + delta * delta).sqrt().sum(); };

    VectorXd r = target - d.design * a;
    double obj = smoothed(r);
    for (int iter = 0; iter < 100; ++iter) {
        const VectorXd sw = (r.array().square() + delta * delta).pow(-0.25);
        const MatrixXd wa = sw.asDiagonal() * d.design;
        const VectorXd wt = sw.asDiagonal() * target;
        a = least_squares(wa, wt).x;
        r = target - d.design * a;
        const double next = smoothed(r);
        const double change = std::abs(obj - next);
        obj = next;
        if (change <= 1e-10 * std::max(obj, delta)) {
            break;
        }
    }

    if (auto vertex = vertex_polish(d, target, r)) {
        const VectorXd rv = target - d.design * *vertex;
        if (l1(rv) <= l1(r)) {
            a = *vertex;
        }
    }
    return a;
}

double offdiag_scale(const SymMatrix<double> &c_hat)
{
    double s = 0;
    for (Index i = 0; i < c_hat.dim(); ++i) {
        for (Index j = i + 1; j < c_hat.dim(); ++j) {
            s = std::max(s, std::abs(c_hat(i, j)));
        }
    }
    return s > 0 ? s : 1.0;
}

struct SpectralPass
{
    EigenPairs<double> eigen;
    ResidualCurve curve;
    G2Estimate g2;
    VectorXd rho;
    double trace = 0;
};

SpectralPass spectral_pass(const SymMatrix<double> &c_hat, double var_y, const PipelineConfig &cfg)
{
    SpectralPass p;
    p.eigen = top_eigenpairs(c_hat, std::min<Index>(2, c_hat.dim()));
    p.trace = c_hat.trace();
    const RhoFamily family = make_rho_family(c_hat, var_y, cfg.loss);
    p.curve = residual_curve(family, p.eigen.vector(0), cfg.grid_points);
    p.g2 = estimate_g2(p.curve, p.eigen.value(0), c_hat.dim(), var_y);
    p.rho = family.rho(p.g2.g2_hat);
    return p;
}

VectorXd gather(const VectorXd &v, const std::vector<Index> &idx)
{
    VectorXd out(static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
        out(static_cast<Index>(k)) = v(idx[k]);
    }
    return out;
}

} // namespace

CenteredData center_predictions(const PredictionMatrix &preds, const ResponseMoments &moments)
{
    if (preds.num_samples() < 2) {
        throw InputError("centering needs at least two samples");
    }
    if (!preds.values().allFinite()) {
        throw InputError("prediction matrix contains non-finite values");
    }
    CenteredData out;
    out.regressor_means = preds.values().rowwise().mean();
    out.bias_estimates = out.regressor_means.array() - moments.mean_y();
    out.z = preds.values().colwise() - out.regressor_means;
    return out;
}

VectorXd fit_additive_offsets(const SymMatrix<double> &c_hat, double q, Loss loss)
{
    if (c_hat.dim() < 3) {
        throw InputError("additive offsets need at least 3 regressors: with fewer, the "
                         "off-diagonal covariances do not identify a_i");
    }
    const PairDesign d = make_pair_design(c_hat);
    const VectorXd a0 = loss == Loss::Squared ? least_squares(d.design, d.offdiag).x
                                              : fit_absolute(d, d.offdiag, offdiag_scale(c_hat));
    return a0.array() - q / 2;
}

double additive_objective(const SymMatrix<double> &c_hat, double q, const VectorXd &a, Loss loss)
{
    double total = 0;
    for (Index i = 0; i < c_hat.dim(); ++i) {
        for (Index j = i + 1; j < c_hat.dim(); ++j) {
            const double r = c_hat(i, j) - q - a(i) - a(j);
            total += loss == Loss::Squared ? r * r : std::abs(r);
        }
    }
    return total;
}

RhoFamily make_rho_family(const SymMatrix<double> &c_hat, double var_y, Loss loss)
{
    return RhoFamily(fit_additive_offsets(c_hat, 0.0, loss), var_y);
}

ResidualCurve residual_curve(const RhoFamily &family, const VectorXd &v1, int grid_points)
{
    if (grid_points < 2) {
        throw InputError("residual curve needs at least 2 grid points");
    }
    if (v1.size() != family.size()) {
        throw InputError("eigenvector length does not match the number of regressors");
    }
    ResidualCurve curve;
    curve.points.reserve(static_cast<std::size_t>(grid_points));
    bool any_regular = false;
    bool all_flat = true;
    double res_lo = 1.0;
    double res_hi = 0.0;
    for (int k = 0; k < grid_points; ++k) {
        const double q = k == grid_points - 1 ? family.var_y()
                                              : family.var_y() * static_cast<double>(k) / (grid_points - 1);
        const VectorXd rho = family.rho(q);
        const double norm = rho.norm();
        ResidualPoint pt{q, 1.0, false};
        if (norm < 1e-12) {
            pt.degenerate = true;
        } else {
            const VectorXd off = rho - v1.dot(rho) * v1;
            pt.res = std::clamp(off.norm() / norm, 0.0, 1.0);
            any_regular = true;
            all_flat = all_flat && pt.res <= 1e-10;
            res_lo = std::min(res_lo, pt.res);
            res_hi = std::max(res_hi, pt.res);
        }
        curve.points.push_back(pt);
    }
    curve.collinear = any_regular && all_flat;
    curve.flat = curve.collinear || (any_regular && res_hi <= kFlatResCeiling && res_hi <= kFlatResRatio * res_lo);
    return curve;
}

G2Estimate estimate_g2(const ResidualCurve &curve, double lambda1, Index m, double var_y)
{
    if (curve.points.empty()) {
        throw InputError("empty residual curve");
    }
    G2Estimate out;
    auto best = curve.points.begin();
    for (auto it = curve.points.begin(); it != curve.points.end(); ++it) {
        if (it->res < best->res) {
            best = it;
        }
    }
    out.res_min = best->res;
    if (curve.collinear || curve.flat) {
        out.g2_hat = std::clamp(lambda1 / static_cast<double>(m), 0.0, var_y);
        out.from_eigenvalue_fallback = true;
    } else {
        out.g2_hat = best->q;
    }
    return out;
}

VectorXd estimate_regressor_mse(const VectorXd &rho_hat, const SymMatrix<double> &c_hat,
                                const ResponseMoments &moments)
{
    if (rho_hat.size() != c_hat.dim()) {
        throw InputError("rho_hat and covariance dimensions differ");
    }
    return moments.var_y() - 2.0 * rho_hat.array() + c_hat.dense().diagonal().array();
}

PruneResult prune_regressors(const VectorXd &rho_hat, const ResponseMoments &moments,
                             const PipelineConfig &cfg)
{
    if (rho_hat.size() < 1) {
        throw InputError("nothing to prune");
    }
    const double abs_floor = cfg.prune_abs_frac * moments.var_y();
    const double rel_floor = cfg.prune_rel_frac * rho_hat.maxCoeff();
    PruneResult out;
    for (Index i = 0; i < rho_hat.size(); ++i) {
        const bool abs_fail = rho_hat(i) < abs_floor;
        const bool rel_fail = rho_hat(i) < rel_floor;
        if (abs_fail && rel_fail) {
            out.rules.push_back(PruneRule::Both);
        } else if (abs_fail) {
            out.rules.push_back(PruneRule::Absolute);
        } else if (rel_fail) {
            out.rules.push_back(PruneRule::Relative);
        } else {
            out.rules.push_back(PruneRule::Kept);
            out.kept.push_back(i);
        }
    }
    return out;
}

WeightResult compute_weights(const EigenPairs<double> &eigen, const VectorXd &rho_hat, double trace,
                             const PipelineConfig &cfg)
{
    if (eigen.size() < 1 || eigen.vectors.rows() != rho_hat.size()) {
        throw InputError("eigenpairs and rho_hat dimensions differ");
    }
    const double lambda1 = eigen.value(0);
    if (!(lambda1 > 1e-12 * std::abs(trace)) || !(lambda1 > 0)) {
        throw NumericalError("degenerate covariance: leading eigenvalue is not positive");
    }
    WeightResult out;
    out.weights = (eigen.vector(0).dot(rho_hat) / lambda1) * eigen.vector(0);
    if (eigen.size() >= 2 && eigen.value(1) > cfg.two_pc_trace_frac * trace) {
        out.weights += (eigen.vector(1).dot(rho_hat) / eigen.value(1)) * eigen.vector(1);
        out.used_two_pcs = true;
    }
    return out;
}

FittedEnsemble upcr_fit(const PredictionMatrix &preds, const ResponseMoments &moments, const PipelineConfig &cfg)
{
    cfg.validate();
    const Index m = preds.num_regressors();
    if (m < 3) {
        throw InputError("U-PCR needs at least 3 regressors (got " + std::to_string(m) + ")");
    }
    const double var_y = moments.var_y();

    FittedEnsemble fit;
    fit.regressor_names = preds.regressor_names();
    fit.mean_y = moments.mean_y();
    fit.var_y = var_y;

    const CenteredData centered = center_predictions(preds, moments);
    fit.bias_estimates = centered.bias_estimates;
    fit.regressor_means = centered.regressor_means;

    const SymMatrix<double> c_hat = sample_covariance(centered.z);
    const SpectralPass first = spectral_pass(c_hat, var_y, cfg);

    fit.initial_curve = first.curve;
    fit.curve = first.curve;
    fit.initial_g2_hat = first.g2.g2_hat;
    fit.g2_hat = first.g2.g2_hat;
    fit.g2_from_fallback = first.g2.from_eigenvalue_fallback;
    fit.eigen = first.eigen;
    fit.trace = first.trace;
    fit.rho_hat_all = first.rho;
    fit.mse_estimates = estimate_regressor_mse(first.rho, c_hat, moments);

    if (first.g2.g2_hat < cfg.eps_l * var_y) {
        fit.difficulty = Difficulty::Hard;
        fit.hard_stage = HardStage::BeforePrune;
        return fit;
    }

    PruneResult pruned = prune_regressors(first.rho, moments, cfg);
    fit.prune_rules = pruned.rules;
    if (pruned.empty()) {
        fit.difficulty = Difficulty::Hard;
        fit.hard_stage = HardStage::NothingKept;
        return fit;
    }
    fit.kept = pruned.kept;
    fit.rho_hat = gather(first.rho, fit.kept);

    VectorXd rho_for_weights = fit.rho_hat;
    if (fit.kept.size() >= 3) {
        const SymMatrix<double> sub = c_hat.principal(fit.kept);
        const SpectralPass second = spectral_pass(sub, var_y, cfg);
        fit.curve = second.curve;
        fit.g2_hat = second.g2.g2_hat;
        fit.g2_from_fallback = second.g2.from_eigenvalue_fallback;
        fit.eigen = second.eigen;
        fit.trace = second.trace;
        fit.refit_rho_hat = second.rho;
        const VectorXd refit_mse = estimate_regressor_mse(second.rho, sub, moments);
        for (std::size_t k = 0; k < fit.kept.size(); ++k) {
            fit.mse_estimates(fit.kept[k]) = refit_mse(static_cast<Index>(k));
        }
        if (second.g2.g2_hat < cfg.eps_l * var_y) {
            fit.difficulty = Difficulty::Hard;
            fit.hard_stage = HardStage::AfterRecompute;
            fit.kept.clear();
            fit.rho_hat.resize(0);
            return fit;
        }
        rho_for_weights = second.rho;
    }

    fit.difficulty = Difficulty::Tractable;
    const auto survivors = static_cast<Index>(fit.kept.size());
    if (survivors <= cfg.min_ensemble_size - 1) {
        fit.weights = VectorXd::Constant(survivors, 1.0 / static_cast<double>(survivors));
        fit.used_fallback_average = true;
    } else {
        WeightResult w = compute_weights(fit.eigen, rho_for_weights, fit.trace, cfg);
        fit.weights = std::move(w.weights);
        fit.used_two_pcs = w.used_two_pcs;
    }
    return fit;
}

VectorXd predict(const FittedEnsemble &fit, const PredictionMatrix &preds)
{
    if (!fit.tractable() || !fit.weights) {
        throw InputError("cannot predict with a model whose verdict is 'hard'");
    }
    const VectorXd &w = *fit.weights;
    if (w.size() != static_cast<Index>(fit.kept.size())) {
        throw InputError("model weights do not match its kept regressors");
    }
    VectorXd y_hat = VectorXd::Constant(preds.num_samples(), fit.mean_y);
    for (std::size_t k = 0; k < fit.kept.size(); ++k) {
        const Index original = fit.kept[k];
        const std::string &name = fit.regressor_names.at(static_cast<std::size_t>(original));
        const auto row = preds.find_regressor(name);
        if (!row) {
            throw InputError("missing regressor column '" + name + "'");
        }
        const double mu = fit.regressor_means(original);
        y_hat += w(static_cast<Index>(k)) * (preds.values().row(*row).transpose().array() - mu).matrix();
    }
    return y_hat;
}

} // namespace upcr
