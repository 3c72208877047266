#pragma once
// JSON encodings of the line-delimited record formats.

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "boolmrc/core.hpp"
#include "boolmrc/ingestion.hpp"

namespace boolmrc {

using json = nlohmann::json;

json to_json(const CharSpan& span);
CharSpan span_from_json(const json& j);

// Dataset record (see ingestion.hpp for the layout).
MrcExample parse_record(const json& record, DatasetSchema schema);
json to_record(const MrcExample& example);

// Prediction record:
//   {"id", "kind", "span"?: {"start","end"}, "score", "predicted_type"}
json to_prediction_record(const FinalAnswer& answer);
FinalAnswer parse_prediction_record(const json& record);

std::vector<FinalAnswer> read_predictions(std::istream& in);
void write_predictions(std::ostream& out, const std::vector<FinalAnswer>& answers);

// Raw extractor output record:
//   {"id", "span": {"start","end"}, "raw_score", "predicted_type", "type_confidence"?}
json to_raw_record(const RawPrediction& prediction);
RawPrediction parse_raw_record(const json& record);

std::vector<RawPrediction> read_raw_predictions(std::istream& in);
void write_raw_predictions(std::ostream& out, const std::vector<RawPrediction>& raw);

}  // namespace boolmrc
