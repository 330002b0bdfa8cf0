#pragma once

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <string>

#include "cxr/metrics.hpp"

namespace cxr::report {

/// `,pred_0,pred_1` header, then rows `true_0` and `true_1`.
/// Throws ValidationError for an all-zero matrix, IoError if the sink fails.
void render_confusion_csv(const metrics::ConfusionMatrix& cm, std::ostream& sink);

/// Column-aligned plain-text version of the same table.
void render_confusion_text(const metrics::ConfusionMatrix& cm, std::ostream& sink);

/// "AUC=0.840 (95% CI 0.615, 0.863)".
std::string roc_caption(double auc, const metrics::ConfidenceInterval& ci);

/// Standalone SVG: unit-square axes, dashed chance diagonal, ROC polyline
/// and the caption. Byte-identical for identical inputs.
void render_roc(const metrics::RocCurve& curve, double auc, const metrics::ConfidenceInterval& ci,
                std::ostream& sink);

/// Provenance of one evaluation run.
struct RunManifest {
  std::optional<std::string> task;
  nlohmann::json split;            // {train_fraction, seed, mode, n_train, n_test}
  std::size_t k = 0;
  std::string extractor_mode;      // "graph" or "stub"
  std::map<std::string, std::string> input_digests;  // needs "metadata_csv" and "embeddings"
  nlohmann::json metrics;
  std::string tool_version;
  std::string bootstrap_method = "percentile";
  std::optional<std::string> created_utc;  // wall clock; ignored by determinism checks
};

/// Key holding the wall-clock time in manifest.json.
inline constexpr const char* kWallClockKey = "created_utc";

/// Throws ValidationError when a required digest is missing or not hex.
void validate(const RunManifest& manifest);

nlohmann::json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& doc);

/// Sorted keys, two-space indent, trailing newline.
void write_manifest(const RunManifest& manifest, std::ostream& sink);

/// Writes a JSON document in the manifest style (sorted keys, trailing newline).
void write_json(const nlohmann::json& doc, std::ostream& sink);

/// Current UTC time as ISO-8601, e.g. "2026-10-16T07:24:00Z".
std::string utc_timestamp();

/// Everything an evaluation produces.
struct ReportBundle {
  metrics::ConfusionMatrix cm;
  metrics::RocCurve roc;
  double auc = 0.0;
  metrics::ConfidenceInterval ci;
  nlohmann::json metrics;
  RunManifest manifest;
};

/// File names written by write_report_directory.
inline constexpr const char* kReportFiles[] = {"confusion_matrix.csv", "confusion_matrix.txt",
                                               "roc.csv", "roc.svg", "metrics.json",
                                               "manifest.json"};

/// Creates `dir` if needed and writes the six report files.
void write_report_directory(const std::filesystem::path& dir, const ReportBundle& bundle);

}  // namespace cxr::report
