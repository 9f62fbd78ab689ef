#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "signet/core/types.hpp"

namespace signet::eval {

struct PairConfusion {
  std::uint64_t tp = 0;  // together in both
  std::uint64_t tn = 0;  // apart in both
  std::uint64_t fp = 0;  // together in pred only
  std::uint64_t fn = 0;  // together in truth only
  std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
  friend bool operator==(const PairConfusion&, const PairConfusion&) = default;
};

/// Label vectors over the same elements in the same order.
PairConfusion pair_confusion(std::span<const int> pred, std::span<const int> truth);
double rand_index(std::span<const int> pred, std::span<const int> truth);
double adjusted_rand_index(std::span<const int> pred, std::span<const int> truth);

/// Assignments are aligned by signature id; element sets must match.
PairConfusion pair_confusion(const ClusterAssignment& pred, const ClusterAssignment& truth);
double rand_index(const ClusterAssignment& pred, const ClusterAssignment& truth);
double adjusted_rand_index(const ClusterAssignment& pred, const ClusterAssignment& truth);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // score >= threshold counts as positive
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1)
  double auc = 0.0;
};

/// Sweep over distinct scores, highest first, with trapezoidal area.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);

double iou(const BBox& a, const BBox& b);

struct Region {
  std::string doc_id;
  int page_index = 0;
  BBox bbox;
};

/// Fraction of predictions overlapping some truth region on the same page
/// with IoU >= threshold. No predictions gives 0 with a warning.
double extraction_precision(std::span<const Region> predicted, std::span<const Region> truth,
                            double iou_threshold = 0.5);

/// One row of a run's telemetry log.
struct TelemetryRow {
  std::string stage;
  std::string item;
  std::int64_t micros = 0;
  std::int64_t bytes = 0;
};

struct RunTelemetry {
  std::vector<TelemetryRow> rows;
};

void write_telemetry(const RunTelemetry& t, const std::filesystem::path& path);
RunTelemetry read_telemetry(const std::filesystem::path& path);

inline constexpr double kReferenceSecondsPerSignature = 0.1;
inline constexpr double kReferenceImageBytes = 26.8e3;
inline constexpr double kReferenceEmbeddingBytes = 3.0e3;
inline constexpr double kReferenceReduction = 0.89;
inline constexpr double kReferenceExtractionPrecisionGated = 0.947;
inline constexpr double kReferenceExtractionPrecisionUngated = 0.935;
inline constexpr double kReferenceClusterScore = 78.19;

struct ScalabilityReport {
  std::size_t signatures = 0;
  std::optional<double> cluster_seconds_per_signature;
  std::optional<double> pipeline_seconds_per_signature;
  std::optional<double> mean_image_bytes;
  std::optional<double> mean_embedding_bytes;
  std::optional<double> reduction;  // 1 - embedding / image
  std::optional<double> reduction_vs_reference_image;  // 1 - embedding / 26.8KB
  std::vector<std::pair<std::string, double>> stage_seconds;
};

/// Signatures are the "embed" stage items; image bytes come from "clean"
/// items and embedding bytes from "embed" items.
ScalabilityReport scalability_report(const RunTelemetry& telemetry);
std::string to_text(const ScalabilityReport& r);
nlohmann::json to_json(const ScalabilityReport& r);

/// Reads (signature_id, label) tab-separated rows; the label column may be
/// any string (author ids) and is mapped to integers by first appearance.
ClusterAssignment read_assignment_tsv(const std::filesystem::path& path);
void write_assignment_tsv(const ClusterAssignment& a, const std::filesystem::path& path);

}  // namespace signet::eval
