#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfbench/data.hpp"
#include "cfbench/protocol.hpp"

namespace cfbench {

inline constexpr int kManifestSchemaVersion = 1;

enum class DataFormat { Idx, Csv, Synthetic };

struct DataSource {
    DataFormat format = DataFormat::Synthetic;
    std::string name;
    // idx
    std::filesystem::path train_images;
    std::filesystem::path train_labels;
    std::filesystem::path test_images;
    std::filesystem::path test_labels;
    // csv
    std::filesystem::path train_csv;
    std::filesystem::path test_csv;
    std::optional<InputDims> csv_dims;
    // synthetic
    BlobParams blobs;
    std::size_t blobs_test_per_class = 50;
    std::uint64_t blobs_seed = 0;
};

struct Manifest {
    int schema_version = kManifestSchemaVersion;
    ModelKind model = ModelKind::FC;
    DataSource data;
    std::vector<SltSpec> slts;
    GridOptions grid;
    ProtocolOptions protocol;
    std::optional<std::size_t> train_cap_per_class;
    std::optional<std::size_t> test_cap_per_class;
    std::filesystem::path output_dir;
    bool checkpoints = false;
    nlohmann::ordered_json echo;  // the manifest as written
};

/// Where relative paths are resolved: data files against `data_dir` when set
/// (else the manifest directory), the output directory against the manifest directory.
struct ManifestContext {
    std::filesystem::path manifest_dir = ".";
    std::optional<std::filesystem::path> data_dir;
};

/// Validates the whole document and throws ManifestError listing every problem.
/// Unknown keys are errors. Referenced data files must exist.
Manifest parse_manifest(const nlohmann::ordered_json& doc, const ManifestContext& ctx);

/// Reads and parses a manifest file. JSON syntax errors become a ManifestError.
Manifest load_manifest(const std::filesystem::path& path,
                       std::optional<std::filesystem::path> data_dir = std::nullopt);

/// Loads the configured dataset, keeps the 10 best-represented classes
/// (relabelled 0..9) and applies the per-class caps.
DatasetPair load_manifest_data(const Manifest& manifest);

/// One ExperimentConfig per SLT of the manifest.
std::vector<ExperimentConfig> experiment_configs(const Manifest& manifest);

}  // namespace cfbench
