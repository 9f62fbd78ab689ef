#include "signet/eval/eval.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "signet/core/errors.hpp"

namespace signet::eval {

namespace {

std::uint64_t choose2(std::uint64_t k) { return k * (k - (k > 0 ? 1 : 0)) / 2; }

struct Contingency {
  std::uint64_t n = 0;
  std::uint64_t sum_cells = 0;  // sum C(n_ij, 2)
  std::uint64_t sum_pred = 0;   // sum C(a_i, 2)
  std::uint64_t sum_truth = 0;  // sum C(b_j, 2)
};

Contingency contingency(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) throw InvalidInput("partitions differ in size");
  std::map<std::pair<int, int>, std::uint64_t> cells;
  std::map<int, std::uint64_t> a;
  std::map<int, std::uint64_t> b;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++cells[{pred[i], truth[i]}];
    ++a[pred[i]];
    ++b[truth[i]];
  }
  Contingency c;
  c.n = pred.size();
  for (const auto& [k, v] : cells) c.sum_cells += choose2(v);
  for (const auto& [k, v] : a) c.sum_pred += choose2(v);
  for (const auto& [k, v] : b) c.sum_truth += choose2(v);
  return c;
}

bool same_partition(std::span<const int> a, std::span<const int> b) {
  return canonical_labels(a) == canonical_labels(b);
}

// Truth labels re-ordered to follow pred's id order.
std::vector<int> aligned_truth(const ClusterAssignment& pred, const ClusterAssignment& truth) {
  pred.validate();
  truth.validate();
  if (pred.size() != truth.size()) throw InvalidInput("assignments cover different signatures");
  std::map<std::string, int> by_id;
  for (std::size_t i = 0; i < truth.size(); ++i) by_id[truth.ids[i]] = truth.labels[i];
  std::vector<int> out;
  out.reserve(pred.size());
  for (const auto& id : pred.ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw InvalidInput("signature '" + id + "' missing from truth");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

PairConfusion pair_confusion(std::span<const int> pred, std::span<const int> truth) {
  const Contingency c = contingency(pred, truth);
  PairConfusion p;
  p.tp = c.sum_cells;
  p.fp = c.sum_pred - c.sum_cells;
  p.fn = c.sum_truth - c.sum_cells;
  p.tn = choose2(c.n) - p.tp - p.fp - p.fn;
  return p;
}

double rand_index(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() < 2) throw InvalidInput("rand index needs at least two elements");
  const PairConfusion p = pair_confusion(pred, truth);
  return static_cast<double>(p.tp + p.tn) / static_cast<double>(p.total());
}

double adjusted_rand_index(std::span<const int> pred, std::span<const int> truth) {
  const Contingency c = contingency(pred, truth);
  const double pairs = static_cast<double>(choose2(c.n));
  const double index = static_cast<double>(c.sum_cells);
  const double expected = pairs > 0.0 ? static_cast<double>(c.sum_pred) * static_cast<double>(c.sum_truth) / pairs : 0.0;
  const double max_index = 0.5 * (static_cast<double>(c.sum_pred) + static_cast<double>(c.sum_truth));
  if (max_index == expected) return same_partition(pred, truth) ? 1.0 : 0.0;
  return (index - expected) / (max_index - expected);
}

PairConfusion pair_confusion(const ClusterAssignment& pred, const ClusterAssignment& truth) {
  return pair_confusion(pred.labels, aligned_truth(pred, truth));
}

double rand_index(const ClusterAssignment& pred, const ClusterAssignment& truth) {
  return rand_index(pred.labels, aligned_truth(pred, truth));
}

double adjusted_rand_index(const ClusterAssignment& pred, const ClusterAssignment& truth) {
  return adjusted_rand_index(pred.labels, aligned_truth(pred, truth));
}

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InvalidInput("scores and labels differ in length");
  std::size_t pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw InvalidInput("labels must be 0 or 1");
    pos += static_cast<std::size_t>(l);
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw InvalidInput("roc curve needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve r;
  r.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0;
  std::size_t fp = 0;
  double area2 = 0.0;  // twice the area, in units of 1/(pos*neg)
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    const std::size_t tp0 = tp;
    const std::size_t fp0 = fp;
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? tp : fp) += 1;
    area2 += static_cast<double>(fp - fp0) * static_cast<double>(tp + tp0);
    r.points.push_back({static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos), s});
  }
  r.auc = area2 / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return r;
}

double iou(const BBox& a, const BBox& b) { return a.iou(b); }

double extraction_precision(std::span<const Region> predicted, std::span<const Region> truth, double iou_threshold) {
  if (predicted.empty()) {
    spdlog::warn("extraction precision of an empty prediction set is reported as 0");
    return 0.0;
  }
  std::size_t hits = 0;
  for (const auto& p : predicted) {
    const bool hit = std::any_of(truth.begin(), truth.end(), [&](const Region& t) {
      return t.doc_id == p.doc_id && t.page_index == p.page_index && iou(t.bbox, p.bbox) >= iou_threshold;
    });
    hits += hit ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

void write_telemetry(const RunTelemetry& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StoreError("cannot write telemetry " + path.string());
  out << "stage\titem\tmicros\tbytes\n";
  for (const auto& r : t.rows) out << r.stage << '\t' << r.item << '\t' << r.micros << '\t' << r.bytes << '\n';
  if (!out) throw StoreError("cannot write telemetry " + path.string());
}

RunTelemetry read_telemetry(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SourceError("cannot read telemetry " + path.string());
  RunTelemetry t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (lineno == 1 && line.rfind("stage\t", 0) == 0)) continue;
    std::istringstream ss(line);
    TelemetryRow r;
    std::string micros;
    std::string bytes;
    if (!std::getline(ss, r.stage, '\t') || !std::getline(ss, r.item, '\t') || !std::getline(ss, micros, '\t') ||
        !std::getline(ss, bytes)) {
      throw FormatError(fmt::format("{}:{}: expected 4 tab-separated fields", path.string(), lineno));
    }
    try {
      r.micros = std::stoll(micros);
      r.bytes = std::stoll(bytes);
    } catch (const std::exception&) {
      throw FormatError(fmt::format("{}:{}: non-numeric field", path.string(), lineno));
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

ScalabilityReport scalability_report(const RunTelemetry& telemetry) {
  ScalabilityReport r;
  std::map<std::string, std::int64_t> stage_micros;
  std::vector<std::string> stage_order;
  std::int64_t cluster_micros = 0;
  std::int64_t image_bytes = 0;
  std::int64_t embed_bytes = 0;
  std::size_t images = 0;
  std::int64_t total_micros = 0;
  for (const auto& row : telemetry.rows) {
    if (!stage_micros.contains(row.stage)) stage_order.push_back(row.stage);
    stage_micros[row.stage] += row.micros;
    total_micros += row.micros;
    if (row.stage == "cluster") cluster_micros += row.micros;
    if (row.stage == "clean") {
      image_bytes += row.bytes;
      ++images;
    }
    if (row.stage == "embed") {
      embed_bytes += row.bytes;
      ++r.signatures;
    }
  }
  for (const auto& s : stage_order) r.stage_seconds.emplace_back(s, static_cast<double>(stage_micros[s]) * 1e-6);
  if (r.signatures > 0) {
    const auto n = static_cast<double>(r.signatures);
    r.cluster_seconds_per_signature = static_cast<double>(cluster_micros) * 1e-6 / n;
    r.pipeline_seconds_per_signature = static_cast<double>(total_micros) * 1e-6 / n;
    r.mean_embedding_bytes = static_cast<double>(embed_bytes) / n;
    r.reduction_vs_reference_image = 1.0 - *r.mean_embedding_bytes / kReferenceImageBytes;
  }
  if (images > 0) r.mean_image_bytes = static_cast<double>(image_bytes) / static_cast<double>(images);
  if (r.mean_image_bytes && r.mean_embedding_bytes && *r.mean_image_bytes > 0.0) {
    r.reduction = 1.0 - *r.mean_embedding_bytes / *r.mean_image_bytes;
  }
  return r;
}

namespace {

std::string opt(const std::optional<double>& v, const char* spec = "{:.4f}") {
  return v ? fmt::format(fmt::runtime(spec), *v) : std::string("n/a");
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

std::string to_text(const ScalabilityReport& r) {
  std::string s;
  s += fmt::format("signatures                       {}\n", r.signatures);
  s += fmt::format("cluster seconds per signature    {}   (reference {:.1f})\n", opt(r.cluster_seconds_per_signature),
                   kReferenceSecondsPerSignature);
  s += fmt::format("pipeline seconds per signature   {}\n", opt(r.pipeline_seconds_per_signature));
  s += fmt::format("mean image bytes                 {}   (reference {:.0f})\n", opt(r.mean_image_bytes, "{:.0f}"),
                   kReferenceImageBytes);
  s += fmt::format("mean embedding bytes             {}   (reference {:.0f})\n", opt(r.mean_embedding_bytes, "{:.0f}"),
                   kReferenceEmbeddingBytes);
  s += fmt::format("reduction vs own images          {}\n", opt(r.reduction, "{:.3f}"));
  s += fmt::format("reduction vs reference image     {}   (reference {:.2f})\n",
                   opt(r.reduction_vs_reference_image, "{:.3f}"), kReferenceReduction);
  if (!r.stage_seconds.empty()) {
    s += "stage seconds\n";
    for (const auto& [stage, sec] : r.stage_seconds) s += fmt::format("  {:<10} {:.3f}\n", stage, sec);
  }
  return s;
}

nlohmann::json to_json(const ScalabilityReport& r) {
  nlohmann::json stages = nlohmann::json::object();
  for (const auto& [stage, sec] : r.stage_seconds) stages[stage] = sec;
  return {{"signatures", r.signatures},
          {"cluster_seconds_per_signature", opt_json(r.cluster_seconds_per_signature)},
          {"pipeline_seconds_per_signature", opt_json(r.pipeline_seconds_per_signature)},
          {"mean_image_bytes", opt_json(r.mean_image_bytes)},
          {"mean_embedding_bytes", opt_json(r.mean_embedding_bytes)},
          {"reduction", opt_json(r.reduction)},
          {"reduction_vs_reference_image", opt_json(r.reduction_vs_reference_image)},
          {"stage_seconds", stages},
          {"reference",
           {{"seconds_per_signature", kReferenceSecondsPerSignature},
            {"image_bytes", kReferenceImageBytes},
            {"embedding_bytes", kReferenceEmbeddingBytes},
            {"reduction", kReferenceReduction}}}};
}

ClusterAssignment read_assignment_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SourceError("cannot read " + path.string());
  ClusterAssignment a;
  std::map<std::string, int> label_ids;
  std::vector<int> raw;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError(fmt::format("{}:{}: expected two tab-separated fields", path.string(), lineno));
    const std::string label = line.substr(tab + 1);
    const auto [it, inserted] = label_ids.emplace(label, static_cast<int>(label_ids.size()));
    a.ids.push_back(line.substr(0, tab));
    raw.push_back(it->second);
  }
  a.labels = canonical_labels(raw);
  a.validate();
  return a;
}

void write_assignment_tsv(const ClusterAssignment& a, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StoreError("cannot write " + path.string());
  for (std::size_t i = 0; i < a.size(); ++i) out << a.ids[i] << '\t' << a.labels[i] << '\n';
  if (!out) throw StoreError("cannot write " + path.string());
}

}  // namespace signet::eval
