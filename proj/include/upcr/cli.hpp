#ifndef UPCR_CLI_HPP
#define UPCR_CLI_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "upcr/baselines.hpp"
#include "upcr/model.hpp"

namespace upcr
{

enum ExitCode : int
{
    kExitOk = 0,
    kExitInputError = 2,
    kExitHard = 3,
    kExitNumerical = 4,
};

/// One row of the `eval` comparison table. `score` is empty when the method
/// does not apply (hard verdict, ill-conditioned GEM, too few regressors).
struct MethodScore
{
    std::string method;
    std::string detail;
    std::optional<Evaluation> score;
};

/// Scores U-PCR, mean, median, oracle, single-expert selections and GEM against labels.
std::vector<MethodScore> compare_methods(const PredictionMatrix &preds, const VectorXd &y,
                                         const ResponseMoments &moments, const PipelineConfig &cfg);

/// Entry point shared by the `upcr` binary and the tests. args[0] is the program name.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace upcr

#endif // UPCR_CLI_HPP
