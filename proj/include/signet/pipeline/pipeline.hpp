#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "signet/core/config.hpp"
#include "signet/core/types.hpp"
#include "signet/eval/eval.hpp"

namespace signet::clean {
class CleanerModel;
}
namespace signet::embed {
class EncoderModel;
}
namespace signet::filter {
class FilterModel;
}

namespace signet::pipeline {

/// Stage directories under the work directory, in execution order.
inline constexpr const char* kStages[] = {"ingest", "extract", "filter", "clean", "embed", "cluster"};

struct RunSummary {
  std::size_t documents = 0;
  std::size_t documents_failed = 0;
  std::size_t pages = 0;
  std::size_t pages_gated = 0;
  std::size_t candidates = 0;
  std::size_t kept = 0;
  std::size_t signatures = 0;
  int clusters = 0;
  std::vector<std::string> reused_stages;  // inputs unchanged since the last run
  std::vector<std::string> errors;         // skipped documents and pages
  std::filesystem::path clusters_tsv;
  std::filesystem::path index_file;
  std::filesystem::path telemetry_file;
};

/// The stage runner over one work directory. Each stage keys its outputs by
/// a digest of its inputs (upstream manifest, relevant config, model bytes)
/// and is skipped when that digest is unchanged. Stages always hand their
/// on-disk outputs to the next stage, so a rerun sees exactly what a fresh
/// run saw.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::filesystem::path workdir);
  ~Pipeline();
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  /// Loads every model the learned stages need; StartupError when one is
  /// missing or unreadable.
  void load_models();

  void ingest(const std::filesystem::path& source_root);
  void extract();
  void filter();
  void clean();
  void embed();
  ClusterAssignment cluster();

  /// Concatenates per-stage telemetry into <workdir>/telemetry.tsv.
  std::filesystem::path write_telemetry();
  eval::RunTelemetry telemetry() const;

  const RunSummary& summary() const noexcept { return summary_; }
  const PipelineConfig& config() const noexcept { return config_; }
  std::filesystem::path stage_dir(const std::string& stage) const { return workdir_ / stage; }

 private:
  struct Models;
  PipelineConfig config_;
  std::filesystem::path workdir_;
  std::unique_ptr<Models> models_;
  RunSummary summary_;
};

/// ingest -> gate -> extract -> filter -> clean -> embed -> cluster. Models
/// are loaded before any work; a document or page that fails is logged,
/// recorded in the summary and skipped.
RunSummary run_pipeline(const PipelineConfig& config, const std::filesystem::path& source_root,
                        const std::filesystem::path& workdir);

/// Splits an id made by format_signature_id back into its parts.
std::optional<Provenance> parse_signature_id(const std::string& id);

struct TruthSignature {
  eval::Region region;
  std::string author;
};

/// Labels each id with the author of the truth region it overlaps best at
/// IoU >= iou_threshold. Ids with no such region are left out.
ClusterAssignment assign_truth(std::span<const std::string> ids, std::span<const TruthSignature> truth,
                               double iou_threshold = 0.5);

}  // namespace signet::pipeline
