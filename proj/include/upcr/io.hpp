#ifndef UPCR_IO_HPP
#define UPCR_IO_HPP

/** @file
 * File formats.
 *
 * Predictions CSV: header `sample_id,<name_1>,...,<name_m>`, one row per
 * sample. Labels CSV: header `sample_id,y`. Reports, fitted models, pipeline
 * configs and synthetic truths are JSON. Doubles are written in shortest
 * round-trip form so values reload bit-exactly.
 */

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "upcr/model.hpp"
#include "upcr/synth.hpp"

namespace upcr
{

using json = nlohmann::json;

struct Labels
{
    std::vector<std::string> sample_ids;
    VectorXd y;
};

/// @p source names the input in error messages (usually the file path).
PredictionMatrix parse_predictions_csv(std::istream &in, const std::string &source);
PredictionMatrix read_predictions_csv(const std::string &path);
void write_predictions_csv(std::ostream &out, const PredictionMatrix &preds);

Labels parse_labels_csv(std::istream &in, const std::string &source);
Labels read_labels_csv(const std::string &path);
void write_labels_csv(std::ostream &out, const std::vector<std::string> &ids, const VectorXd &y,
                      const std::string &value_column = "y");

/// Reorders @p labels to follow @p sample_ids; throws on any id mismatch.
VectorXd align_labels(const Labels &labels, const std::vector<std::string> &sample_ids);

/// Shortest decimal text that parses back to exactly @p x.
std::string format_double(double x);

json config_to_json(const PipelineConfig &cfg);
/// Keys mirror the PipelineConfig field names; absent keys keep their defaults.
PipelineConfig config_from_json(const json &j, PipelineConfig base = {});

/// Full machine-readable estimate report.
json report_to_json(const FittedEnsemble &fit, const PipelineConfig &cfg);

/// Just what prediction needs; model_from_json(model_to_json(f)) predicts bit-identically to f.
json model_to_json(const FittedEnsemble &fit);
FittedEnsemble model_from_json(const json &j);

json synth_spec_to_json(const SyntheticEnsembleSpec &spec);
SyntheticEnsembleSpec synth_spec_from_json(const json &j, SyntheticEnsembleSpec base = {});
json truth_to_json(const SyntheticTruth &truth);

json read_json_file(const std::string &path);
void write_text_file(const std::string &path, const std::string &text);

} // namespace upcr

#endif // UPCR_IO_HPP
