#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "trge/experiment.hpp"

namespace trge {

inline constexpr int kArtifactVersion = 1;
inline constexpr const char* kArtifactFormat = "trge-run-artifact";

// File names written into a run directory.
namespace files {
inline constexpr const char* kArtifact = "artifact.json";
inline constexpr const char* kConfig = "config.txt";
inline constexpr const char* kMetricsText = "metrics.txt";
inline constexpr const char* kMetricsRecords = "metrics.jsonl";
inline constexpr const char* kAccuracyCsv = "accuracy_matrix.csv";
inline constexpr const char* kFrequencyCsv = "selection_frequency.csv";
inline constexpr const char* kTrainLog = "train_log.jsonl";
}  // namespace files

nlohmann::json to_json(const RunResult& result);
RunResult run_result_from_json(const nlohmann::json& payload);

// {"format", "version", "checksum", "payload"} with checksum = SHA-256 of
// payload.dump().
nlohmann::json make_envelope(const RunResult& result, bool partial = false);
// Verifies format, version and checksum. Throws ArtifactError.
RunResult open_envelope(const nlohmann::json& envelope);

// A run that failed part-way: only the artifact is written, flagged partial,
// with the failure message alongside.
void save_partial_run(const RunResult& result, const std::filesystem::path& dir,
                      const std::string& error);

// Writes the artifact plus human- and machine-readable reports into `dir`.
void save_run(const RunResult& result, const std::filesystem::path& dir);
// Accepts the artifact file or the run directory containing it.
RunResult load_run(const std::filesystem::path& path);

std::string render_metrics_table(const MetricsReport& report);
std::string metrics_records(const MetricsReport& report);
std::string train_log_records(const RunResult& result);

}  // namespace trge
