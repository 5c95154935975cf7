#include "upcr/model.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace upcr
{

namespace
{

void require_unique(const std::vector<std::string> &items, const char *what)
{
    std::unordered_set<std::string> seen;
    for (const auto &s : items) {
        if (!seen.insert(s).second) {
            throw InputError(std::string("duplicate ") + what + " '" + s + "'");
        }
    }
}

std::vector<std::string> numbered(Index count, const char *prefix)
{
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) {
        out.push_back(prefix + std::to_string(i));
    }
    return out;
}

} // namespace

PredictionMatrix::PredictionMatrix(std::vector<std::string> regressor_names,
                                   std::vector<std::string> sample_ids, MatrixXd values)
    : names_(std::move(regressor_names)), ids_(std::move(sample_ids)), values_(std::move(values))
{
    if (values_.rows() < 1 || values_.cols() < 1) {
        throw InputError("prediction matrix must have at least one regressor and one sample");
    }
    if (static_cast<Index>(names_.size()) != values_.rows()) {
        throw InputError("number of regressor names does not match number of rows");
    }
    if (static_cast<Index>(ids_.size()) != values_.cols()) {
        throw InputError("number of sample ids does not match number of columns");
    }
    require_unique(names_, "regressor name");
    require_unique(ids_, "sample id");
    for (Index i = 0; i < values_.rows(); ++i) {
        for (Index j = 0; j < values_.cols(); ++j) {
            if (!std::isfinite(values_(i, j))) {
                std::ostringstream msg;
                msg << "non-finite prediction for regressor '" << names_[static_cast<std::size_t>(i)]
                    << "' at sample '" << ids_[static_cast<std::size_t>(j)] << "'";
                throw InputError(msg.str());
            }
        }
    }
}

PredictionMatrix::PredictionMatrix(MatrixXd values)
    : PredictionMatrix(numbered(values.rows(), "f"), numbered(values.cols(), ""), values)
{
}

std::optional<Index> PredictionMatrix::find_regressor(const std::string &name) const
{
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) {
            return static_cast<Index>(i);
        }
    }
    return std::nullopt;
}

PredictionMatrix PredictionMatrix::select_rows(std::span<const Index> rows) const
{
    std::vector<std::string> names;
    MatrixXd vals(static_cast<Index>(rows.size()), values_.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        names.push_back(names_.at(static_cast<std::size_t>(rows[k])));
        vals.row(static_cast<Index>(k)) = values_.row(rows[k]);
    }
    return PredictionMatrix(std::move(names), ids_, std::move(vals));
}

ResponseMoments::ResponseMoments(double mean_y, double var_y) : mean_y_(mean_y), var_y_(var_y)
{
    if (!std::isfinite(mean_y)) {
        throw InputError("mean of Y must be finite");
    }
    if (!std::isfinite(var_y) || !(var_y > 0)) {
        throw InputError("variance of Y must be finite and strictly positive");
    }
}

RhoFamily::RhoFamily(VectorXd a0, double var_y) : a0_(std::move(a0)), var_y_(var_y)
{
    if (!(var_y_ > 0)) {
        throw InputError("RhoFamily: var_y must be positive");
    }
}

void RhoFamily::check_domain(double q) const
{
    if (!(q >= 0.0 && q <= var_y_)) {
        std::ostringstream msg;
        msg << "q = " << q << " outside [0, " << var_y_ << "]";
        throw InputError(msg.str());
    }
}

VectorXd RhoFamily::rho(double q) const
{
    check_domain(q);
    return a0_.array() + q / 2;
}

VectorXd RhoFamily::offsets(double q) const
{
    check_domain(q);
    return a0_.array() - q / 2;
}

void PipelineConfig::validate() const
{
    auto in_unit = [](double x) { return x > 0.0 && x < 1.0; };
    if (grid_points < 2) {
        throw InputError("grid_points must be at least 2");
    }
    if (!in_unit(eps_l)) {
        throw InputError("eps_l must lie in (0, 1)");
    }
    if (!in_unit(prune_abs_frac) || !in_unit(prune_rel_frac) || !in_unit(two_pc_trace_frac)) {
        throw InputError("prune_abs_frac, prune_rel_frac and two_pc_trace_frac must lie in (0, 1)");
    }
    if (min_ensemble_size < 1) {
        throw InputError("min_ensemble_size must be positive");
    }
}

std::vector<std::string> FittedEnsemble::kept_names() const
{
    std::vector<std::string> out;
    for (Index i : kept) {
        out.push_back(regressor_names.at(static_cast<std::size_t>(i)));
    }
    return out;
}

const char *to_string(Loss loss)
{
    return loss == Loss::Squared ? "squared" : "absolute";
}

const char *to_string(Difficulty d)
{
    return d == Difficulty::Hard ? "hard" : "tractable";
}

const char *to_string(HardStage s)
{
    switch (s) {
    case HardStage::None: return "none";
    case HardStage::BeforePrune: return "before_prune";
    case HardStage::NothingKept: return "nothing_kept";
    case HardStage::AfterRecompute: return "after_recompute";
    }
    return "none";
}

const char *to_string(PruneRule r)
{
    switch (r) {
    case PruneRule::Kept: return "kept";
    case PruneRule::Absolute: return "absolute";
    case PruneRule::Relative: return "relative";
    case PruneRule::Both: return "both";
    }
    return "kept";
}

Loss parse_loss(const std::string &text)
{
    if (text == "squared") {
        return Loss::Squared;
    }
    if (text == "absolute") {
        return Loss::Absolute;
    }
    throw InputError("unknown loss '" + text + "' (expected squared|absolute)");
}

} // namespace upcr
