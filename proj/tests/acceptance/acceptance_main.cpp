// One PASS/FAIL line per acceptance criterion. Exit status is nonzero if any
// criterion fails. Pass criterion names as arguments to run a subset.

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "signet/clean/clean.hpp"
#include "signet/cluster/cluster.hpp"
#include "signet/embed/embed.hpp"
#include "signet/eval/eval.hpp"
#include "signet/extract/extract.hpp"
#include "signet/filter/filter.hpp"
#include "signet/pipeline/pipeline.hpp"
#include "signet/store/index.hpp"
#include "signet/synth/synth.hpp"
#include "signet/synth/toy_models.hpp"
#include "signet/util/image_io.hpp"

using namespace signet;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kAriTolerance = 1e-12;
constexpr double kCycleTolerance = 1e-9;
constexpr double kAucTolerance = 1e-9;
constexpr double kFilterTrainAccuracy = 0.95;
constexpr double kSiameseTrainAccuracy = 0.90;
constexpr std::size_t kMaxRecordBytes = 4200;
constexpr double kReferenceImageBytes = 26.8 * 1000;
constexpr double kMinReduction = 0.84;
constexpr double kSecondsPerSignature = 0.1;
constexpr int kTimingSignatures = 537;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::vector<float> random_unit_free(std::mt19937_64& rng, int dim) {
  std::normal_distribution<float> d(0.0F, 1.0F);
  std::vector<float> v(static_cast<std::size_t>(dim));
  for (float& x : v) x = d(rng);
  return v;
}

std::vector<std::span<const float>> spans(const std::vector<std::vector<float>>& pts) {
  return {pts.begin(), pts.end()};
}

std::vector<std::vector<double>> square(const std::vector<double>& flat, int n) {
  std::vector<std::vector<double>> d(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    d[static_cast<std::size_t>(i)].assign(flat.begin() + i * n, flat.begin() + (i + 1) * n);
  }
  return d;
}

Outcome rand_index_sweep() {
  const auto t0 = Clock::now();
  std::size_t pairs = 0;
  double worst_ari = 0.0;
  bool ri_exact = true;
  for (int n = 2; n <= 6; ++n) {
    const auto parts = oracle::set_partitions(n);
    for (const auto& a : parts) {
      for (const auto& b : parts) {
        ++pairs;
        if (eval::rand_index(a, b) != oracle::rand_index(a, b)) ri_exact = false;
        worst_ari = std::max(worst_ari, std::abs(eval::adjusted_rand_index(a, b) - oracle::adjusted_rand_index(a, b)));
      }
    }
  }
  const double secs = seconds_since(t0);
  return {ri_exact && worst_ari <= kAriTolerance && secs < 60.0,
          fmt::format("{} partition pairs, RI exact={}, max |dARI|={:.2e}, {:.2f}s", pairs, ri_exact, worst_ari, secs)};
}

Outcome clustering_hard_criterion() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1001);
  std::size_t violations = 0;
  std::size_t nest_failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 50);
    const int dim = 2 + static_cast<int>(rng() % 30);
    std::vector<std::vector<float>> pts;
    for (int i = 0; i < n; ++i) pts.push_back(random_unit_free(rng, dim));
    const auto d = cluster::distance_matrix(spans(pts));
    const auto tree = cluster::complete_linkage(d, n);
    std::uniform_real_distribution<double> ut(0.0, 2.0);
    const double t = ut(rng);
    const auto labels = cluster::cut(tree, t);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)] &&
            d[static_cast<std::size_t>(i * n + j)] > t) {
          ++violations;
        }
      }
    }
    if (trial % 100 == 0) {
      // Nestedness: every cluster at t1 lies inside one cluster at t2 >= t1.
      for (int k = 0; k < 10; ++k) {
        double t1 = ut(rng);
        double t2 = ut(rng);
        if (t1 > t2) std::swap(t1, t2);
        const auto fine = cluster::cut(tree, t1);
        const auto coarse = cluster::cut(tree, t2);
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            if (fine[static_cast<std::size_t>(i)] == fine[static_cast<std::size_t>(j)] &&
                coarse[static_cast<std::size_t>(i)] != coarse[static_cast<std::size_t>(j)]) {
              ++nest_failures;
            }
          }
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && nest_failures == 0 && secs < 120.0,
          fmt::format("1000 sets, {} intra-pair violations, 100 threshold pairs with {} nesting breaks, {:.2f}s",
                      violations, nest_failures, secs)};
}

Outcome clustering_oracle() {
  std::mt19937_64 rng(2002);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8);
    std::vector<std::vector<float>> pts;
    for (int i = 0; i < n; ++i) pts.push_back(random_unit_free(rng, 2 + static_cast<int>(rng() % 6)));
    // Equal dimensions within a set.
    for (auto& p : pts) p.resize(pts[0].size(), 0.5F);
    const double t = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
    const auto labels = cluster::cluster_points(spans(pts), t);
    const auto d = cluster::distance_matrix(spans(pts));
    if (labels != oracle::complete_linkage_partition(square(d, n), t)) ++mismatches;
  }
  return {mismatches == 0, fmt::format("200 trials, {} mismatches", mismatches)};
}

Outcome cca_oracle() {
  std::mt19937_64 rng(3003);
  int mismatches = 0;
  int conservation = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int w = 1 + static_cast<int>(rng() % 64);
    const int h = 1 + static_cast<int>(rng() % 64);
    const double p = std::uniform_real_distribution<double>(0.05, 0.8)(rng);
    BinaryImage m{MaskGrid(w, h, 0), "d", 0};
    std::size_t ink = 0;
    for (auto& v : m.pixels.cells()) {
      v = std::bernoulli_distribution(p)(rng) ? 1 : 0;
      ink += v;
    }
    std::set<std::vector<std::pair<int, int>>> got;
    std::set<std::pair<int, int>> seen;
    std::size_t total = 0;
    for (const auto& r : extract::connected_components(m)) {
      std::vector<std::pair<int, int>> px;
      for (const auto& q : r.pixels) {
        px.emplace_back(q.y, q.x);
        seen.emplace(q.y, q.x);
      }
      total += px.size();
      std::sort(px.begin(), px.end());
      got.insert(px);
    }
    if (got != oracle::flood_fill(m.pixels)) ++mismatches;
    if (total != ink || seen.size() != ink) ++conservation;
  }
  return {mismatches == 0 && conservation == 0,
          fmt::format("500 images, {} oracle mismatches, {} conservation failures", mismatches, conservation)};
}

Outcome cycle_loss_fixtures() {
  using clean::ImageMap;
  using clean::PixelReduction;
  using nn::Tensor;
  const ImageMap identity = [](const Tensor& t) { return t; };
  const ImageMap zero = [](const Tensor& t) { return Tensor(t.n(), t.c(), t.h(), t.w(), 0.0F); };
  const ImageMap complement = [](const Tensor& t) {
    Tensor out = t;
    for (float& v : out.values()) v = 1.0F - v;
    return out;
  };
  double worst = 0.0;
  auto check = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };

  // Single pixel: F(G(x)) = 0 so the loss is x + y.
  check(clean::cycle_loss(zero, zero, Tensor(1, 1, 1, 1, 0.25F), Tensor(1, 1, 1, 1, 0.75F)), 1.0);
  check(clean::cycle_loss(zero, zero, Tensor(1, 1, 1, 1, 0.5F), Tensor(1, 1, 1, 1, 0.125F)), 0.625);
  // Constant 2x2 images through identity then complement: 4 * (|1-2x| + |1-2y|).
  check(clean::cycle_loss(identity, complement, Tensor(2, 1, 2, 2, 0.25F), Tensor(2, 1, 2, 2, 0.875F)), 5.0);
  check(clean::cycle_loss(identity, complement, Tensor(2, 1, 2, 2, 0.25F), Tensor(2, 1, 2, 2, 0.875F),
                          PixelReduction::kMean),
        1.25);
  check(clean::cycle_loss(identity, complement, Tensor(3, 1, 3, 3, 0.5F), Tensor(1, 1, 3, 3, 0.5F)), 0.0);

  Tensor x(3, 1, 8, 8);
  std::mt19937_64 rng(4004);
  for (float& v : x.values()) v = std::uniform_real_distribution<float>(0.0F, 1.0F)(rng);
  const double ident = clean::cycle_loss(identity, identity, x, x);
  const double ident_mean = clean::cycle_loss(identity, identity, x, x, PixelReduction::kMean);
  return {worst <= kCycleTolerance && ident == 0.0 && ident_mean == 0.0,
          fmt::format("max fixture error {:.2e}, identity loss {} / {}", worst, ident, ident_mean)};
}

Outcome toy_filter() {
  const auto t0 = Clock::now();
  filter::LabeledRegionSet set;
  const auto author = synth::make_author(31);
  for (int i = 0; i < 5; ++i) {
    set.items.push_back({synth::signature_canvas(author, 700 + static_cast<std::uint64_t>(i)), 1, filter::Split::kTrain});
    set.items.push_back({synth::clutter_canvas(800 + static_cast<std::uint64_t>(i)), 0, filter::Split::kTrain});
  }
  filter::FilterTrainOptions o;
  o.epochs = 200;
  o.seed = 7;
  o.stop_at_train_accuracy = kFilterTrainAccuracy;
  const auto res = filter::train_filter(set, o);
  const double acc = res.history.back().train_accuracy;
  const double secs = seconds_since(t0);
  return {acc >= kFilterTrainAccuracy && secs < 600.0,
          fmt::format("10 images, train accuracy {:.3f} after {} epochs, {:.1f}s", acc, res.history.size(), secs)};
}

Outcome toy_siamese() {
  const auto t0 = Clock::now();
  std::vector<embed::LabeledSignature> labeled;
  for (int a = 0; a < 4; ++a) {
    const auto author = synth::make_author(41 + static_cast<std::uint64_t>(a));
    for (int i = 0; i < 4; ++i) {
      labeled.push_back({synth::signature_canvas(author, 900 + static_cast<std::uint64_t>(10 * a + i)),
                         "author" + std::to_string(a)});
    }
  }
  const auto pairs = embed::build_pairs(labeled, 1.0, 8, 0.0);
  embed::SiameseTrainOptions o;
  o.epochs = 100;
  o.seed = 8;
  o.stop_at_train_accuracy = kSiameseTrainAccuracy;
  const double untrained = embed::pair_accuracy(embed::EncoderModel::create(o.arch, o.seed), pairs.train);
  const auto res = embed::train_siamese(pairs, o);
  const double acc = res.history.back().train_accuracy;
  const double secs = seconds_since(t0);
  return {acc >= kSiameseTrainAccuracy && secs < 600.0,
          fmt::format("4 authors, {} train pairs, pair accuracy {:.3f} untrained -> {:.3f} after {} epochs, {:.1f}s",
                      pairs.train.size(), untrained, acc, res.history.size(), secs)};
}

Outcome toy_cleaner() {
  const auto t0 = Clock::now();
  const auto stamps = synth::stamp_set(16, 51);
  clean::CleanTrainingSet data;
  data.unpaired_x = stamps.stamped;
  data.unpaired_y = stamps.clean;
  clean::CleanerTrainOptions o;
  o.epochs = 50;
  o.seed = 9;
  o.arch = synth::ToyModelOptions{}.cleaner_arch;
  const auto res = clean::train_cleaner(data, o);
  const double first = res.history.front().cycle;
  const double last = res.history.back().cycle;
  const double secs = seconds_since(t0);
  return {last < first && secs < 600.0,
          fmt::format("16 stamped images, cycle term epoch 1 {:.4f} -> epoch {} {:.4f}, {:.1f}s", first,
                      res.history.size(), last, secs)};
}

// Writes n generated documents signed by both authors and returns their truth.
std::vector<pipeline::TruthSignature> write_documents(const fs::path& dir, const std::vector<synth::AuthorStyle>& authors,
                                                      int n, std::uint64_t seed) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<pipeline::TruthSignature> truth;
  for (int d = 0; d < n; ++d) {
    const auto kind = d % 3 == 0 ? synth::FileKind::kPng : d % 3 == 1 ? synth::FileKind::kTiff : synth::FileKind::kPdf;
    const char* ext = d % 3 == 0 ? ".png" : d % 3 == 1 ? ".tif" : ".pdf";
    const auto doc = synth::make_document("doc" + std::to_string(d) + ext, authors, {0, 1}, seed + static_cast<std::uint64_t>(d));
    synth::write_document(doc, dir, kind, 100);
    for (std::size_t p = 0; p < doc.signatures.size(); ++p) {
      for (const auto& s : doc.signatures[p]) {
        truth.push_back({{doc.doc_id, static_cast<int>(p), s.bbox}, "author" + std::to_string(s.author)});
      }
    }
  }
  return truth;
}

struct EndToEnd {
  bool ran = false;
  std::size_t records = 0;
  std::size_t index_bytes = 0;
  std::size_t max_record_bytes = 0;
};

EndToEnd g_e2e;

Outcome end_to_end() {
  const auto t0 = Clock::now();
  const fs::path root = fs::temp_directory_path() / "signet_acceptance_e2e";
  fs::remove_all(root);
  const std::vector<synth::AuthorStyle> authors{synth::make_author(11), synth::make_author(22)};
  synth::ToyModelOptions mo;
  mo.seed = 5;
  auto models = synth::train_toy_models(authors, mo);
  const auto paths = synth::save_toy_models(models, root / "models");

  PipelineConfig cfg;
  cfg.dpi = 100;
  cfg.filter_model = paths.filter.string();
  cfg.cleaner_model = paths.cleaner.string();
  cfg.encoder_model = paths.encoder.string();

  // Pick t on separate calibration documents by the same writers.
  const auto calib_truth = write_documents(root / "calib", authors, 6, 500);
  const auto calib = pipeline::run_pipeline(cfg, root / "calib", root / "work_calib");
  const auto calib_records = store::load_index(calib.index_file);
  std::vector<std::string> calib_ids;
  for (const auto& r : calib_records) calib_ids.push_back(r.signature_id);
  const auto calib_labels = pipeline::assign_truth(calib_ids, calib_truth);
  std::vector<double> dist;
  std::vector<int> same;
  for (std::size_t i = 0; i < calib_labels.size(); ++i) {
    for (std::size_t j = i + 1; j < calib_labels.size(); ++j) {
      const auto find = [&](const std::string& id) {
        for (const auto& r : calib_records) {
          if (r.signature_id == id) return r.dequantize();
        }
        return Vector{};
      };
      dist.push_back(cluster::cosine_distance(find(calib_labels.ids[i]), find(calib_labels.ids[j])));
      same.push_back(calib_labels.labels[i] == calib_labels.labels[j] ? 1 : 0);
    }
  }
  if (dist.empty()) return {false, "calibration produced no labelled pairs"};
  cfg.t = cluster::select_threshold(dist, same);

  const auto truth = write_documents(root / "docs", authors, 3, 100);
  const auto first = pipeline::run_pipeline(cfg, root / "docs", root / "work");
  const auto pred = eval::read_assignment_tsv(first.clusters_tsv);
  const auto truth_assign = pipeline::assign_truth(pred.ids, truth);
  double ari = -1.0;
  if (truth_assign.size() == pred.size() && pred.size() >= 2) ari = eval::adjusted_rand_index(pred, truth_assign);

  const auto clusters_bytes = io::read_bytes(first.clusters_tsv);
  const auto index_bytes = io::read_bytes(first.index_file);
  const auto again = pipeline::run_pipeline(cfg, root / "docs", root / "work");
  const auto fresh = pipeline::run_pipeline(cfg, root / "docs", root / "work_fresh");
  const bool identical = io::read_bytes(again.clusters_tsv) == clusters_bytes &&
                         io::read_bytes(again.index_file) == index_bytes &&
                         io::read_bytes(fresh.clusters_tsv) == clusters_bytes &&
                         io::read_bytes(fresh.index_file) == index_bytes;

  const auto records = store::load_index(first.index_file);
  g_e2e.ran = true;
  g_e2e.records = records.size();
  g_e2e.index_bytes = index_bytes.size();
  for (const auto& r : records) g_e2e.max_record_bytes = std::max(g_e2e.max_record_bytes, store::record_bytes(r));

  const double secs = seconds_since(t0);
  const bool ok = first.documents == 3 && pred.size() == 6 && truth_assign.size() == 6 && first.clusters == 2 &&
                  ari == 1.0 && identical;
  return {ok, fmt::format("t={:.2f} from {} calibration pairs; {} docs, {} signatures ({} matched to truth), {} clusters, "
                          "ARI {:.4f}, rerun byte-identical={}, {:.1f}s",
                          cfg.t, dist.size(), first.documents, pred.size(), truth_assign.size(), first.clusters, ari,
                          identical, secs)};
}

Outcome space_claim() {
  // Records from the end-to-end run when it ran; otherwise a synthetic
  // record with an id of the same shape.
  std::size_t worst = 0;
  std::string source;
  if (g_e2e.ran && g_e2e.records > 0) {
    worst = g_e2e.max_record_bytes;
    source = fmt::format("{} pipeline records, index {} bytes", g_e2e.records, g_e2e.index_bytes);
  } else {
    std::mt19937_64 rng(6006);
    const auto v = random_unit_free(rng, kEmbeddingDim);
    const auto id = format_signature_id({"doc0.pdf", 0, BBox{120, 840, 419, 939}});
    worst = store::record_bytes(store::quantize(Embedding(Vector(v.begin(), v.end()), id)));
    source = "synthetic record";
  }
  const double reduction = 1.0 - static_cast<double>(worst) / kReferenceImageBytes;
  return {worst <= kMaxRecordBytes && reduction >= kMinReduction,
          fmt::format("{}: max {} bytes per signature, {:.1f}% below the 26.8 KB image baseline", source, worst,
                      100.0 * reduction)};
}

Outcome time_claim() {
  std::mt19937_64 rng(7007);
  std::vector<Embedding> e;
  for (int i = 0; i < kTimingSignatures; ++i) {
    const auto v = random_unit_free(rng, kEmbeddingDim);
    e.emplace_back(Vector(v.begin(), v.end()), "s" + std::to_string(i));
  }
  const auto t0 = Clock::now();
  const auto [assignment, tree] = cluster::cluster(e, 0.5);
  const double secs = seconds_since(t0);
  const double budget = kSecondsPerSignature * kTimingSignatures;
  return {secs <= budget && assignment.size() == static_cast<std::size_t>(kTimingSignatures),
          fmt::format("{} x {}-d embeddings clustered in {:.3f}s ({:.5f}s per signature, budget {:.1f}s)",
                      kTimingSignatures, kEmbeddingDim, secs, secs / kTimingSignatures, budget)};
}

Outcome roc_oracle() {
  std::mt19937_64 rng(8008);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 60);
    std::vector<double> s;
    std::vector<int> l;
    for (int i = 0; i < n; ++i) {
      s.push_back(trial % 2 == 0 ? static_cast<double>(rng() % 7) / 7.0 : std::uniform_real_distribution<double>()(rng));
      l.push_back(static_cast<int>(rng() % 2));
    }
    l[0] = 0;
    l[1] = 1;
    worst = std::max(worst, std::abs(eval::roc_curve(s, l).auc - oracle::outrank_probability(s, l)));
  }
  bool rejected = false;
  try {
    eval::roc_curve(std::vector<double>{0.2, 0.4, 0.9}, std::vector<int>{1, 1, 1});
  } catch (const InvalidInput&) {
    rejected = true;
  }
  return {worst <= kAucTolerance && rejected,
          fmt::format("100 sets, max |dAUC|={:.2e}, single-class input rejected={}", worst, rejected)};
}

Outcome index_codec() {
  std::mt19937_64 rng(9009);
  std::vector<store::EmbeddingRecord> recs;
  for (int i = 0; i < 1000; ++i) {
    const auto v = random_unit_free(rng, kEmbeddingDim);
    const int pad = static_cast<int>(rng() % 40);
    recs.push_back(store::quantize(Embedding(Vector(v.begin(), v.end()), "doc" + std::to_string(i) + std::string(static_cast<std::size_t>(pad), 'x'))));
  }
  const fs::path dir = fs::temp_directory_path() / "signet_acceptance_codec";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto file = dir / "index.sgnt";
  store::save_index(recs, file);
  const bool round_trip = store::load_index(file) == recs;
  std::size_t formula = store::kIndexHeaderBytes;
  for (const auto& r : recs) formula += 2 + r.signature_id.size() + 16 + r.codes.size();
  const bool sizes = fs::file_size(file) == formula && store::index_bytes(recs) == formula;

  const auto bytes = io::read_bytes(file);
  int truncations_missed = 0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t cut = rng() % bytes.size();
    try {
      store::decode_index(std::span<const std::uint8_t>(bytes.data(), cut));
      ++truncations_missed;
    } catch (const Error&) {
    }
  }
  bool magic_detected = false;
  auto bad = bytes;
  bad[1] ^= 0x5A;
  try {
    store::decode_index(bad);
  } catch (const FormatError&) {
    magic_detected = true;
  }
  fs::remove_all(dir);
  return {round_trip && sizes && truncations_missed == 0 && magic_detected,
          fmt::format("1000 records, round trip exact={}, size {} bytes matches formula={}, {} of 200 truncations "
                      "undetected, bad magic detected={}",
                      round_trip, formula, sizes, truncations_missed, magic_detected)};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<Criterion> criteria{
      {"rand-index-sweep", rand_index_sweep},
      {"clustering-hard-criterion", clustering_hard_criterion},
      {"clustering-oracle", clustering_oracle},
      {"cca-oracle", cca_oracle},
      {"cycle-loss-fixtures", cycle_loss_fixtures},
      {"toy-training-filter", toy_filter},
      {"toy-training-siamese", toy_siamese},
      {"toy-training-cleaner", toy_cleaner},
      {"end-to-end", end_to_end},
      {"space-per-signature", space_claim},
      {"time-per-signature", time_claim},
      {"roc-oracle", roc_oracle},
      {"index-codec", index_codec},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(c.name)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
