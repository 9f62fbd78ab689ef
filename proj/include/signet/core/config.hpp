#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace signet {

inline constexpr int kConfigSchemaVersion = 1;

/// Closed interval [low, high].
struct Bounds {
  double low = 0.0;
  double high = 0.0;

  bool contains(double v) const noexcept { return v >= low && v <= high; }
  friend bool operator==(const Bounds&, const Bounds&) = default;
};

enum class Binarization { kOtsu, kAdaptive };

/// Every tunable of the pipeline. Relative quantities are fractions of the
/// page (width, shorter side or area) because scan resolution varies.
struct PipelineConfig {
  int schema_version = kConfigSchemaVersion;
  unsigned long long seed = 0;
  int workers = 1;

  // ingest
  int dpi = 200;
  std::vector<std::string> keywords{"electronically filed",
                                    "this document was delivered electronically"};
  std::string ocr_engine = "glyph";

  // extract
  Binarization binarization = Binarization::kOtsu;
  double adaptive_window = 0.02;  // fraction of the shorter page side
  double adaptive_offset = 0.08;  // intensity below the local mean
  double merge_dist = 0.015;      // fraction of page width
  double edge_margin = 0.01;      // fraction of the shorter page side
  double line_min_length = 0.3;   // fraction of page width
  double line_min_aspect = 20.0;
  Bounds density{0.02, 0.4};
  Bounds aspect{0.5, 12.0};
  Bounds area{0.001, 0.08};  // fraction of page area

  // learned stages
  double cnn_threshold = 0.5;
  std::string filter_model = "models/filter.sgnm";
  std::string cleaner_model = "models/cleaner.sgnm";
  std::string encoder_model = "models/encoder.sgnm";
  double lambda_cyc = 10.0;
  double lambda_pair = 5.0;

  // cluster / store
  double t = 0.5;
  bool compress_index = false;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

/// Parses JSON config text, applies defaults for absent keys and range-checks
/// every field. Throws ConfigError naming the first offending field.
PipelineConfig validate_config(std::string_view raw);

/// Reads and validates a config file. An empty path yields the defaults.
PipelineConfig load_config(const std::string& path);

/// Serializes every field; validate_config(to_json(c)) == c.
std::string to_json(const PipelineConfig& config);

}  // namespace signet
