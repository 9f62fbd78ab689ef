#include "signet/core/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "signet/core/errors.hpp"

namespace signet {

using nlohmann::json;

namespace {

double read_number(const json& doc, const std::string& key, double fallback) {
  if (!doc.contains(key)) return fallback;
  const auto& v = doc.at(key);
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  return v.get<double>();
}

void check_range(const std::string& key, double v, double lo, double hi) {
  if (!(v >= lo && v <= hi)) {
    std::ostringstream os;
    os << v << " not in [" << lo << ", " << hi << "]";
    throw ConfigError(key, os.str());
  }
}

int read_int(const json& doc, const std::string& key, int fallback, int lo, int hi) {
  if (!doc.contains(key)) return fallback;
  const auto& v = doc.at(key);
  if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
  const auto n = v.get<long long>();
  check_range(key, static_cast<double>(n), lo, hi);
  return static_cast<int>(n);
}

std::string read_string(const json& doc, const std::string& key, const std::string& fallback) {
  if (!doc.contains(key)) return fallback;
  const auto& v = doc.at(key);
  if (!v.is_string()) throw ConfigError(key, "expected a string");
  return v.get<std::string>();
}

Bounds read_bounds(const json& doc, const std::string& key, Bounds fallback, double lo,
                   double hi) {
  if (!doc.contains(key)) return fallback;
  const auto& v = doc.at(key);
  if (!v.is_object()) throw ConfigError(key, "expected {\"min\": ..., \"max\": ...}");
  for (const auto& [k, _] : v.items()) {
    if (k != "min" && k != "max") throw ConfigError(key + "." + k, "unknown key");
  }
  Bounds b = fallback;
  b.low = read_number(v, "min", fallback.low);
  b.high = read_number(v, "max", fallback.high);
  check_range(key + ".min", b.low, lo, hi);
  check_range(key + ".max", b.high, lo, hi);
  if (b.low > b.high) throw ConfigError(key, "min exceeds max");
  return b;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "schema_version", "seed",          "workers",         "dpi",
      "keywords",       "ocr_engine",    "binarization",    "adaptive_window",
      "adaptive_offset", "merge_dist",   "edge_margin",     "line_min_length",
      "line_min_aspect", "density",      "aspect",          "area",
      "cnn_threshold",  "models",        "lambda_cyc",      "lambda_pair",
      "t",              "compress_index"};
  return keys;
}

}  // namespace

PipelineConfig validate_config(std::string_view raw) {
  json doc;
  const bool blank = std::all_of(raw.begin(), raw.end(),
                                 [](unsigned char c) { return std::isspace(c) != 0; });
  if (blank) {
    doc = json::object();
  } else {
    try {
      doc = json::parse(raw);
    } catch (const json::parse_error& e) {
      throw ConfigError("<document>", e.what());
    }
  }
  if (doc.is_null()) doc = json::object();
  if (!doc.is_object()) throw ConfigError("<document>", "top level must be an object");
  for (const auto& [k, _] : doc.items()) {
    if (!known_keys().contains(k)) throw ConfigError(k, "unknown key");
  }

  PipelineConfig c;
  c.schema_version = read_int(doc, "schema_version", kConfigSchemaVersion, 0, 1 << 20);
  if (c.schema_version != kConfigSchemaVersion) {
    throw ConfigError("schema_version", "unsupported version " +
                                            std::to_string(c.schema_version));
  }
  if (doc.contains("seed")) {
    const auto& s = doc.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
      throw ConfigError("seed", "expected a non-negative integer");
    }
    c.seed = s.get<unsigned long long>();
  }
  c.workers = read_int(doc, "workers", c.workers, 1, 256);
  c.dpi = read_int(doc, "dpi", c.dpi, 36, 1200);

  if (doc.contains("keywords")) {
    const auto& kw = doc.at("keywords");
    if (!kw.is_array() || kw.empty()) throw ConfigError("keywords", "expected a non-empty list");
    c.keywords.clear();
    for (const auto& item : kw) {
      if (!item.is_string() || item.get<std::string>().empty()) {
        throw ConfigError("keywords", "entries must be non-empty strings");
      }
      std::string s = item.get<std::string>();
      std::transform(s.begin(), s.end(), s.begin(),
                     [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
      c.keywords.push_back(std::move(s));
    }
  }
  c.ocr_engine = read_string(doc, "ocr_engine", c.ocr_engine);
  if (c.ocr_engine != "glyph" && c.ocr_engine != "sidecar" && c.ocr_engine != "none") {
    throw ConfigError("ocr_engine", "expected glyph, sidecar or none");
  }

  const std::string bin = read_string(doc, "binarization", "otsu");
  if (bin == "otsu") {
    c.binarization = Binarization::kOtsu;
  } else if (bin == "adaptive") {
    c.binarization = Binarization::kAdaptive;
  } else {
    throw ConfigError("binarization", "expected otsu or adaptive");
  }
  c.adaptive_window = read_number(doc, "adaptive_window", c.adaptive_window);
  check_range("adaptive_window", c.adaptive_window, 1e-4, 0.5);
  c.adaptive_offset = read_number(doc, "adaptive_offset", c.adaptive_offset);
  check_range("adaptive_offset", c.adaptive_offset, 0.0, 1.0);
  c.merge_dist = read_number(doc, "merge_dist", c.merge_dist);
  if (!(c.merge_dist > 0.0 && c.merge_dist <= 1.0)) {
    throw ConfigError("merge_dist", "must lie in (0, 1]");
  }
  c.edge_margin = read_number(doc, "edge_margin", c.edge_margin);
  check_range("edge_margin", c.edge_margin, 0.0, 0.49);
  c.line_min_length = read_number(doc, "line_min_length", c.line_min_length);
  check_range("line_min_length", c.line_min_length, 1e-4, 1.0);
  c.line_min_aspect = read_number(doc, "line_min_aspect", c.line_min_aspect);
  check_range("line_min_aspect", c.line_min_aspect, 1.0, 1e6);
  c.density = read_bounds(doc, "density", c.density, 0.0, 1.0);
  c.aspect = read_bounds(doc, "aspect", c.aspect, 1e-6, 1e6);
  c.area = read_bounds(doc, "area", c.area, 0.0, 1.0);

  c.cnn_threshold = read_number(doc, "cnn_threshold", c.cnn_threshold);
  check_range("cnn_threshold", c.cnn_threshold, 0.0, 1.0);
  if (doc.contains("models")) {
    const auto& m = doc.at("models");
    if (!m.is_object()) throw ConfigError("models", "expected an object");
    for (const auto& [k, _] : m.items()) {
      if (k != "filter" && k != "cleaner" && k != "encoder") {
        throw ConfigError("models." + k, "unknown key");
      }
    }
    c.filter_model = read_string(m, "filter", c.filter_model);
    c.cleaner_model = read_string(m, "cleaner", c.cleaner_model);
    c.encoder_model = read_string(m, "encoder", c.encoder_model);
  }
  c.lambda_cyc = read_number(doc, "lambda_cyc", c.lambda_cyc);
  check_range("lambda_cyc", c.lambda_cyc, 0.0, 1e6);
  c.lambda_pair = read_number(doc, "lambda_pair", c.lambda_pair);
  check_range("lambda_pair", c.lambda_pair, 0.0, 1e6);

  c.t = read_number(doc, "t", c.t);
  check_range("t", c.t, 0.0, 2.0);
  if (doc.contains("compress_index")) {
    if (!doc.at("compress_index").is_boolean()) {
      throw ConfigError("compress_index", "expected a boolean");
    }
    c.compress_index = doc.at("compress_index").get<bool>();
  }
  return c;
}

PipelineConfig load_config(const std::string& path) {
  if (path.empty()) return PipelineConfig{};
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return validate_config(ss.str());
}

std::string to_json(const PipelineConfig& c) {
  auto bounds = [](const Bounds& b) { return json{{"min", b.low}, {"max", b.high}}; };
  json doc{
      {"schema_version", c.schema_version},
      {"seed", c.seed},
      {"workers", c.workers},
      {"dpi", c.dpi},
      {"keywords", c.keywords},
      {"ocr_engine", c.ocr_engine},
      {"binarization", c.binarization == Binarization::kOtsu ? "otsu" : "adaptive"},
      {"adaptive_window", c.adaptive_window},
      {"adaptive_offset", c.adaptive_offset},
      {"merge_dist", c.merge_dist},
      {"edge_margin", c.edge_margin},
      {"line_min_length", c.line_min_length},
      {"line_min_aspect", c.line_min_aspect},
      {"density", bounds(c.density)},
      {"aspect", bounds(c.aspect)},
      {"area", bounds(c.area)},
      {"cnn_threshold", c.cnn_threshold},
      {"models",
       {{"filter", c.filter_model}, {"cleaner", c.cleaner_model}, {"encoder", c.encoder_model}}},
      {"lambda_cyc", c.lambda_cyc},
      {"lambda_pair", c.lambda_pair},
      {"t", c.t},
      {"compress_index", c.compress_index},
  };
  return doc.dump(2);
}

}  // namespace signet
