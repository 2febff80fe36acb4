#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfbench/protocol.hpp"

namespace cfbench {

inline constexpr int kRecordSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

/// `<dataset>_<model>_<slt>`, safe for file names.
std::string experiment_id(const std::string& dataset, ModelKind model, const std::string& slt);
std::string experiment_id(const ExperimentResult& result);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

/// Two-decimal table cell in the ".88" style; values >= 1 keep the leading digit.
std::string table_cell(double v);

/// Self-contained result document: manifest echo, grid, every run, quality,
/// baseline, metrics. Contains no wall-clock data, so reruns are byte-identical.
nlohmann::ordered_json result_to_json(const ExperimentResult& result,
                                      const nlohmann::ordered_json& manifest_echo);

/// One JSON object per evaluation point and split:
///   {"schema", "experiment", "phase", "grid_index", "eps2", "alpha", "variant",
///    "step", "epoch", "split", "accuracy", "failed"}
/// phase is phase1 | phase2 | baseline | imm; split is d1 | d2 | joint.
std::vector<std::string> record_lines(const ExperimentResult& result);

/// Summary CSV, one row per experiment. Numbers are written at full precision.
std::string summary_csv_header();
std::string summary_csv_row(const ExperimentResult& result);

struct Checkpoint {
    Network model;
    std::optional<FisherDiagonal> fisher;
};

nlohmann::ordered_json checkpoint_to_json(const Network& model,
                                          const std::optional<FisherDiagonal>& fisher);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

nlohmann::ordered_json layer_to_json(const LayerSpec& layer);
LayerSpec layer_from_json(const nlohmann::json& j);

}  // namespace cfbench
