#pragma once

#include <string>

#include <json.hpp>

#include "mnse/bounds.hpp"
#include "mnse/dataset.hpp"
#include "mnse/optimizer.hpp"

namespace mnse {

using Json = nlohmann::json;

Json matrix_to_json(const Matrix& m);          // row-major nested arrays
Matrix matrix_from_json(const Json& j);

Json model_to_json(const EmbeddingModel& model);
EmbeddingModel model_from_json(const Json& j);

Json synth_config_to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const Json& j);

Json bound_report_to_json(const BoundReport& report);

/// Writes via a temporary file + rename so readers never see partial output.
void write_file_atomic(const std::string& path, const std::string& contents);

void save_model(const EmbeddingModel& model, const std::string& path);
EmbeddingModel load_model(const std::string& path);

/// Structural validation of the documents this toolkit emits. `kind` is the
/// document's "kind" field: mnse-model, classify-report, retrieve-report,
/// bound-report, matrix-dump. Throws ValidationError on mismatch.
void check_schema(const Json& j, const std::string& kind);

/// Dataset directory layout: modality_<v>_features.csv, modality_<v>_ids.csv
/// (v starting at 1), labels.csv, and optionally synth.json.
void save_dataset_dir(const MultiModalDataset& ds, const std::string& dir,
                      const SynthConfig* cfg = nullptr);
MultiModalDataset load_dataset_dir(const std::string& dir);
bool load_synth_config_dir(const std::string& dir, SynthConfig& out);

} // namespace mnse
