#include "signet/pipeline/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "signet/clean/clean.hpp"
#include "signet/cluster/cluster.hpp"
#include "signet/core/errors.hpp"
#include "signet/embed/embed.hpp"
#include "signet/extract/extract.hpp"
#include "signet/filter/filter.hpp"
#include "signet/ingest/ocr.hpp"
#include "signet/ingest/source.hpp"
#include "signet/store/index.hpp"
#include "signet/util/digest.hpp"
#include "signet/util/image_io.hpp"
#include "signet/util/parallel.hpp"

namespace signet::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

struct Pipeline::Models {
  std::unique_ptr<filter::FilterModel> filter;
  std::unique_ptr<clean::CleanerModel> cleaner;
  std::unique_ptr<embed::EncoderModel> encoder;
  std::string filter_digest;
  std::string cleaner_digest;
  std::string encoder_digest;
};

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t micros_since(Clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - t0).count();
}

std::string file_digest(const fs::path& p) {
  const auto bytes = io::read_bytes(p);
  return Digest().update(bytes).hex();
}

std::vector<json> read_manifest(const fs::path& dir) {
  std::vector<json> out;
  std::ifstream in(dir / "manifest.jsonl", std::ios::binary);
  if (!in) throw StoreError("missing manifest in " + dir.string() + "; run the earlier stages first");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw FormatError("bad manifest line in " + dir.string() + ": " + e.what());
    }
  }
  return out;
}

std::string manifest_digest(const fs::path& dir) { return file_digest(dir / "manifest.jsonl"); }

bool up_to_date(const fs::path& dir, const std::string& digest) {
  const fs::path marker = dir / "stage.json";
  if (!fs::is_regular_file(marker) || !fs::is_regular_file(dir / "manifest.jsonl")) return false;
  try {
    return json::parse(io::read_text(marker)).value("input_digest", "") == digest;
  } catch (const std::exception&) {
    return false;
  }
}

void begin_stage(const fs::path& dir) {
  std::error_code ec;
  fs::remove_all(dir, ec);
  fs::create_directories(dir);
}

// The marker goes last, so an interrupted stage is redone on the next run.
void commit_stage(const fs::path& dir, const std::string& digest, const std::vector<json>& manifest,
                  const eval::RunTelemetry& telemetry) {
  std::string text;
  for (const auto& m : manifest) text += m.dump() + "\n";
  io::write_text(dir / "manifest.jsonl", text);
  eval::write_telemetry(telemetry, dir / "telemetry.tsv");
  io::write_text(dir / "stage.json", json{{"input_digest", digest}}.dump() + "\n");
}

std::string item_name(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%06zu.png", prefix, i);
  return buf;
}

json config_subset(const PipelineConfig& cfg, std::initializer_list<const char*> keys) {
  const json all = json::parse(to_json(cfg));
  json out = json::object();
  for (const char* k : keys) out[k] = all.at(k);
  return out;
}

SignatureImage read_canvas(const fs::path& p, const std::string& id, SignatureState state) {
  SignatureImage img;
  img.pixels = io::read_gray(p);
  img.state = state;
  if (auto prov = parse_signature_id(id)) img.provenance = *prov;
  img.validate();
  return img;
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config, fs::path workdir)
    : config_(std::move(config)), workdir_(std::move(workdir)), models_(std::make_unique<Models>()) {
  fs::create_directories(workdir_);
}

Pipeline::~Pipeline() = default;

void Pipeline::load_models() {
  auto load = [](const std::string& path, const char* what, auto loader, std::string& digest) {
    if (!fs::is_regular_file(path)) throw StartupError(std::string(what) + " model not found: " + path);
    try {
      digest = file_digest(path);
      return loader(path);
    } catch (const Error& e) {
      throw StartupError(std::string("cannot load ") + what + " model " + path + ": " + e.what());
    }
  };
  models_->filter = load(config_.filter_model, "filter",
                         [](const std::string& p) { return std::make_unique<filter::FilterModel>(filter::FilterModel::load(p)); },
                         models_->filter_digest);
  models_->cleaner = load(config_.cleaner_model, "cleaner",
                          [](const std::string& p) { return std::make_unique<clean::CleanerModel>(clean::CleanerModel::load(p)); },
                          models_->cleaner_digest);
  models_->encoder = load(config_.encoder_model, "encoder",
                          [](const std::string& p) { return std::make_unique<embed::EncoderModel>(embed::EncoderModel::load(p)); },
                          models_->encoder_digest);
}

// ------------------------------------------------------------------ ingest

void Pipeline::ingest(const fs::path& source_root) {
  const fs::path dir = stage_dir("ingest");
  const auto docs = ingest::list_documents(source_root);
  Digest d;
  d.update("ingest").update(config_subset(config_, {"dpi", "keywords", "ocr_engine"}).dump());
  for (const auto& doc : docs) {
    d.update(doc.doc_id);
    try {
      d.update(file_digest(doc.uri));
    } catch (const Error&) {
      d.update("unreadable");
    }
  }
  const std::string digest = d.hex();

  if (up_to_date(dir, digest)) {
    summary_.reused_stages.push_back("ingest");
  } else {
    begin_stage(dir);
    struct PageOut {
      json line;
      std::vector<std::uint8_t> png;  // empty for gated or failed pages
    };
    struct DocResult {
      std::vector<PageOut> pages;
      std::vector<eval::TelemetryRow> rows;
    };
    std::vector<DocResult> results(docs.size());
    parallel_for(docs.size(), config_.workers, [&](std::size_t i) {
      const auto& doc = docs[i];
      DocResult& r = results[i];
      const auto t0 = Clock::now();
      std::vector<PageImage> pages;
      try {
        pages = ingest::render_pages(doc, config_.dpi);
      } catch (const Error& e) {
        spdlog::warn("skipping document {}: {}", doc.doc_id, e.what());
        r.pages.push_back({{{"doc_id", doc.doc_id}, {"error", e.what()}}, {}});
        r.rows.push_back({"ingest", doc.doc_id, micros_since(t0), 0});
        return;
      }
      auto engine = ingest::make_ocr_engine(config_.ocr_engine, source_root);
      for (const auto& page : pages) {
        const auto tp = Clock::now();
        PageOut out{{{"doc_id", doc.doc_id}, {"page", page.page_index}, {"dpi", page.dpi}}, {}};
        try {
          const auto gate = ingest::ocr_gate(page, config_.keywords, *engine);
          out.line["gated"] = !gate.accepted;
          if (gate.matched_keyword) out.line["keyword"] = *gate.matched_keyword;
          if (gate.accepted) out.png = io::encode_png(page.pixels);
        } catch (const Error& e) {
          spdlog::warn("skipping page {} of {}: {}", page.page_index, doc.doc_id, e.what());
          out.line["error"] = e.what();
        }
        r.rows.push_back({"ingest", doc.doc_id + "#p" + std::to_string(page.page_index), micros_since(tp),
                          static_cast<std::int64_t>(out.png.size())});
        r.pages.push_back(std::move(out));
      }
    });
    // Files are numbered in document order so names do not depend on scheduling.
    std::vector<json> manifest;
    eval::RunTelemetry tel;
    std::size_t n = 0;
    for (auto& r : results) {
      for (auto& page : r.pages) {
        if (!page.png.empty()) {
          const std::string name = item_name("page", n++);
          io::write_bytes(dir / name, page.png);
          page.line["file"] = name;
        }
        manifest.push_back(std::move(page.line));
      }
      for (auto& row : r.rows) tel.rows.push_back(std::move(row));
    }
    commit_stage(dir, digest, manifest, tel);
  }

  std::set<std::string> doc_ids;
  std::set<std::string> failed;
  summary_.pages = 0;
  summary_.pages_gated = 0;
  for (const auto& m : read_manifest(dir)) {
    doc_ids.insert(m.at("doc_id").get<std::string>());
    if (!m.contains("page")) {
      failed.insert(m.at("doc_id").get<std::string>());
      summary_.errors.push_back(m.at("doc_id").get<std::string>() + ": " + m.at("error").get<std::string>());
      continue;
    }
    ++summary_.pages;
    if (m.value("gated", false)) ++summary_.pages_gated;
    if (m.contains("error")) {
      summary_.errors.push_back(m.at("doc_id").get<std::string>() + "#p" + std::to_string(m.at("page").get<int>()) +
                                ": " + m.at("error").get<std::string>());
    }
  }
  summary_.documents = doc_ids.size();
  summary_.documents_failed = failed.size();
  spdlog::info("ingest: {} documents ({} failed), {} pages, {} gated", summary_.documents, summary_.documents_failed,
               summary_.pages, summary_.pages_gated);
}

// ----------------------------------------------------------------- extract

void Pipeline::extract() {
  const fs::path in_dir = stage_dir("ingest");
  const fs::path dir = stage_dir("extract");
  const std::string digest =
      Digest()
          .update("extract")
          .update(manifest_digest(in_dir))
          .update(config_subset(config_, {"binarization", "adaptive_window", "adaptive_offset", "merge_dist", "edge_margin",
                                          "line_min_length", "line_min_aspect", "density", "aspect", "area"})
                      .dump())
          .hex();
  if (up_to_date(dir, digest)) {
    summary_.reused_stages.push_back("extract");
  } else {
    begin_stage(dir);
    std::vector<json> pages;
    for (auto& m : read_manifest(in_dir)) {
      if (m.contains("file") && !m.contains("error")) pages.push_back(std::move(m));
    }
    struct PageResult {
      std::vector<CandidateRegion> candidates;
      std::string error;
      std::int64_t micros = 0;
    };
    std::vector<PageResult> results(pages.size());
    parallel_for(pages.size(), config_.workers, [&](std::size_t i) {
      const auto t0 = Clock::now();
      PageImage page;
      page.doc_id = pages[i].at("doc_id").get<std::string>();
      page.page_index = pages[i].at("page").get<int>();
      page.dpi = pages[i].value("dpi", config_.dpi);
      try {
        page.pixels = io::read_gray(in_dir / pages[i].at("file").get<std::string>());
        results[i].candidates = extract::extract_candidates(page, config_);
      } catch (const Error& e) {
        spdlog::warn("skipping page {} of {}: {}", page.page_index, page.doc_id, e.what());
        results[i].error = e.what();
      }
      results[i].micros = micros_since(t0);
    });
    std::vector<json> manifest;
    eval::RunTelemetry tel;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pages.size(); ++i) {
      const std::string doc_id = pages[i].at("doc_id").get<std::string>();
      const int page_index = pages[i].at("page").get<int>();
      tel.rows.push_back({"extract", doc_id + "#p" + std::to_string(page_index), results[i].micros,
                          static_cast<std::int64_t>(results[i].candidates.size())});
      if (!results[i].error.empty()) {
        manifest.push_back({{"doc_id", doc_id}, {"page", page_index}, {"error", results[i].error}});
        continue;
      }
      for (const auto& c : results[i].candidates) {
        const std::string name = item_name("crop", n++);
        io::write_png(dir / name, c.crop.pixels);
        const Provenance prov{doc_id, page_index, c.bbox};
        manifest.push_back({{"id", format_signature_id(prov)},
                            {"doc_id", doc_id},
                            {"page", page_index},
                            {"bbox", {c.bbox.x_min, c.bbox.y_min, c.bbox.x_max, c.bbox.y_max}},
                            {"density", c.density},
                            {"file", name}});
      }
    }
    commit_stage(dir, digest, manifest, tel);
  }
  summary_.candidates = 0;
  for (const auto& m : read_manifest(dir)) {
    if (m.contains("id")) {
      ++summary_.candidates;
    } else {
      summary_.errors.push_back(m.at("doc_id").get<std::string>() + "#p" + std::to_string(m.at("page").get<int>()) +
                                ": " + m.at("error").get<std::string>());
    }
  }
  spdlog::info("extract: {} candidate regions", summary_.candidates);
}

// ------------------------------------------------------------------ filter

void Pipeline::filter() {
  if (!models_->filter) throw StartupError("filter model not loaded");
  const fs::path in_dir = stage_dir("extract");
  const fs::path dir = stage_dir("filter");
  const std::string digest = Digest()
                                 .update("filter")
                                 .update(manifest_digest(in_dir))
                                 .update(config_subset(config_, {"cnn_threshold"}).dump())
                                 .update(models_->filter_digest)
                                 .hex();
  if (up_to_date(dir, digest)) {
    summary_.reused_stages.push_back("filter");
  } else {
    begin_stage(dir);
    std::vector<json> items;
    for (auto& m : read_manifest(in_dir)) {
      if (m.contains("id")) items.push_back(std::move(m));
    }
    std::vector<double> scores(items.size(), 0.0);
    std::vector<std::int64_t> micros(items.size(), 0);
    std::vector<std::string> errors(items.size());
    parallel_for(items.size(), config_.workers, [&](std::size_t i) {
      const auto t0 = Clock::now();
      try {
        const std::string id = items[i].at("id").get<std::string>();
        const auto img = read_canvas(in_dir / items[i].at("file").get<std::string>(), id, SignatureState::kRaw);
        scores[i] = filter::predict_signature(*models_->filter, img);
      } catch (const Error& e) {
        errors[i] = e.what();
      }
      micros[i] = micros_since(t0);
    });
    std::vector<json> manifest;
    eval::RunTelemetry tel;
    for (std::size_t i = 0; i < items.size(); ++i) {
      const std::string id = items[i].at("id").get<std::string>();
      json line{{"id", id}, {"file", items[i].at("file")}};
      if (!errors[i].empty()) {
        spdlog::warn("skipping region {}: {}", id, errors[i]);
        line["error"] = errors[i];
        line["kept"] = false;
      } else {
        line["score"] = scores[i];
        line["kept"] = scores[i] > config_.cnn_threshold;
      }
      manifest.push_back(std::move(line));
      tel.rows.push_back({"filter", id, micros[i], 0});
    }
    commit_stage(dir, digest, manifest, tel);
  }
  summary_.kept = 0;
  for (const auto& m : read_manifest(dir)) summary_.kept += m.value("kept", false) ? 1 : 0;
  spdlog::info("filter: kept {} of {} regions", summary_.kept, summary_.candidates);
}

// ------------------------------------------------------------------- clean

void Pipeline::clean() {
  if (!models_->cleaner) throw StartupError("cleaner model not loaded");
  const fs::path crops_dir = stage_dir("extract");
  const fs::path in_dir = stage_dir("filter");
  const fs::path dir = stage_dir("clean");
  const std::string digest =
      Digest().update("clean").update(manifest_digest(in_dir)).update(models_->cleaner_digest).hex();
  if (up_to_date(dir, digest)) {
    summary_.reused_stages.push_back("clean");
  } else {
    begin_stage(dir);
    std::vector<json> items;
    for (auto& m : read_manifest(in_dir)) {
      if (m.value("kept", false)) items.push_back(std::move(m));
    }
    std::vector<std::vector<std::uint8_t>> pngs(items.size());
    std::vector<std::int64_t> micros(items.size(), 0);
    std::vector<std::string> errors(items.size());
    parallel_for(items.size(), config_.workers, [&](std::size_t i) {
      const auto t0 = Clock::now();
      try {
        const std::string id = items[i].at("id").get<std::string>();
        const auto raw = read_canvas(crops_dir / items[i].at("file").get<std::string>(), id, SignatureState::kRaw);
        pngs[i] = io::encode_png(clean::clean(*models_->cleaner, raw).pixels);
      } catch (const Error& e) {
        errors[i] = e.what();
      }
      micros[i] = micros_since(t0);
    });
    std::vector<json> manifest;
    eval::RunTelemetry tel;
    for (std::size_t i = 0; i < items.size(); ++i) {
      const std::string id = items[i].at("id").get<std::string>();
      if (!errors[i].empty()) {
        spdlog::warn("skipping region {}: {}", id, errors[i]);
        manifest.push_back({{"id", id}, {"error", errors[i]}});
        continue;
      }
      const std::string name = item_name("clean", i);
      io::write_bytes(dir / name, pngs[i]);
      manifest.push_back({{"id", id}, {"file", name}, {"bytes", pngs[i].size()}});
      tel.rows.push_back({"clean", id, micros[i], static_cast<std::int64_t>(pngs[i].size())});
    }
    commit_stage(dir, digest, manifest, tel);
  }
}

// ------------------------------------------------------------------- embed

void Pipeline::embed() {
  if (!models_->encoder) throw StartupError("encoder model not loaded");
  const fs::path in_dir = stage_dir("clean");
  const fs::path dir = stage_dir("embed");
  const std::string digest = Digest()
                                 .update("embed")
                                 .update(manifest_digest(in_dir))
                                 .update(models_->encoder_digest)
                                 .update(config_subset(config_, {"compress_index"}).dump())
                                 .hex();
  if (up_to_date(dir, digest)) {
    summary_.reused_stages.push_back("embed");
  } else {
    begin_stage(dir);
    std::vector<json> items;
    for (auto& m : read_manifest(in_dir)) {
      if (m.contains("file")) items.push_back(std::move(m));
    }
    std::vector<std::optional<store::EmbeddingRecord>> records(items.size());
    std::vector<std::int64_t> micros(items.size(), 0);
    std::vector<std::string> errors(items.size());
    parallel_for(items.size(), config_.workers, [&](std::size_t i) {
      const auto t0 = Clock::now();
      try {
        const std::string id = items[i].at("id").get<std::string>();
        const auto img = read_canvas(in_dir / items[i].at("file").get<std::string>(), id, SignatureState::kCleaned);
        const Embedding e = embed::embed(*models_->encoder, img);
        records[i] = store::quantize(Embedding(e.values(), id));
      } catch (const Error& e) {
        errors[i] = e.what();
      }
      micros[i] = micros_since(t0);
    });
    std::vector<store::EmbeddingRecord> index;
    std::vector<json> manifest;
    eval::RunTelemetry tel;
    for (std::size_t i = 0; i < items.size(); ++i) {
      const std::string id = items[i].at("id").get<std::string>();
      if (!records[i]) {
        spdlog::warn("skipping region {}: {}", id, errors[i]);
        manifest.push_back({{"id", id}, {"error", errors[i]}});
        continue;
      }
      const auto bytes = static_cast<std::int64_t>(store::record_bytes(*records[i]));
      manifest.push_back({{"id", id}, {"bytes", bytes}});
      tel.rows.push_back({"embed", id, micros[i], bytes});
      index.push_back(std::move(*records[i]));
    }
    store::save_index(index, dir / "index.sgnt");
    if (config_.compress_index) store::gzip_file(dir / "index.sgnt", dir / "index.sgnt.gz");
    commit_stage(dir, digest, manifest, tel);
  }
  summary_.index_file = dir / "index.sgnt";
  summary_.signatures = 0;
  for (const auto& m : read_manifest(dir)) summary_.signatures += m.contains("bytes") ? 1 : 0;
  spdlog::info("embed: {} signatures indexed", summary_.signatures);
}

// ----------------------------------------------------------------- cluster

ClusterAssignment Pipeline::cluster() {
  const fs::path index_path = stage_dir("embed") / "index.sgnt";
  const fs::path dir = stage_dir("cluster");
  const std::string digest =
      Digest().update("cluster").update(file_digest(index_path)).update(config_subset(config_, {"t"}).dump()).hex();
  if (up_to_date(dir, digest)) {
    summary_.reused_stages.push_back("cluster");
  } else {
    begin_stage(dir);
    const auto t0 = Clock::now();
    const auto records = store::load_index(index_path);
    ClusterAssignment a;
    a.threshold_t = config_.t;
    json tree_json = json::object();
    if (!records.empty()) {
      std::vector<Embedding> embs;
      embs.reserve(records.size());
      for (const auto& r : records) embs.emplace_back(r.dequantize(), r.signature_id);
      auto [assignment, tree] = cluster::cluster(embs, config_.t);
      a = std::move(assignment);
      json merges = json::array();
      for (const auto& m : tree.merges) merges.push_back({m.a, m.b, m.height, m.size});
      tree_json = {{"leaves", tree.leaves}, {"merges", merges}};
    }
    const std::int64_t micros = micros_since(t0);
    eval::write_assignment_tsv(a, dir / "clusters.tsv");
    io::write_text(dir / "dendrogram.json", tree_json.dump() + "\n");
    eval::RunTelemetry tel;
    tel.rows.push_back({"cluster", "all", micros, static_cast<std::int64_t>(records.size())});
    commit_stage(dir, digest, {json{{"file", "clusters.tsv"}, {"signatures", records.size()}, {"t", config_.t}}}, tel);
  }
  const fs::path out = workdir_ / "clusters.tsv";
  fs::copy_file(dir / "clusters.tsv", out, fs::copy_options::overwrite_existing);
  ClusterAssignment a = eval::read_assignment_tsv(out);
  a.threshold_t = config_.t;
  summary_.clusters_tsv = out;
  summary_.clusters = a.cluster_count();
  spdlog::info("cluster: {} clusters at t = {}", summary_.clusters, config_.t);
  return a;
}

eval::RunTelemetry Pipeline::telemetry() const {
  eval::RunTelemetry all;
  for (const char* stage : kStages) {
    const fs::path p = workdir_ / stage / "telemetry.tsv";
    if (!fs::is_regular_file(p)) continue;
    for (auto& row : eval::read_telemetry(p).rows) all.rows.push_back(std::move(row));
  }
  return all;
}

fs::path Pipeline::write_telemetry() {
  const fs::path out = workdir_ / "telemetry.tsv";
  eval::write_telemetry(telemetry(), out);
  summary_.telemetry_file = out;
  return out;
}

RunSummary run_pipeline(const PipelineConfig& config, const fs::path& source_root, const fs::path& workdir) {
  if (!fs::is_directory(source_root)) throw SourceError("document source not found: " + source_root.string());
  Pipeline p(config, workdir);
  p.load_models();
  p.ingest(source_root);
  p.extract();
  p.filter();
  p.clean();
  p.embed();
  p.cluster();
  p.write_telemetry();
  return p.summary();
}

std::optional<Provenance> parse_signature_id(const std::string& id) {
  const auto box_sep = id.rfind('#');
  if (box_sep == std::string::npos || box_sep == 0) return std::nullopt;
  const auto page_sep = id.rfind('#', box_sep - 1);
  if (page_sep == std::string::npos || id.compare(page_sep, 2, "#p") != 0) return std::nullopt;
  Provenance p;
  p.doc_id = id.substr(0, page_sep);
  int v[4];
  try {
    p.page_index = std::stoi(id.substr(page_sep + 2, box_sep - page_sep - 2));
    std::size_t pos = box_sep + 1;
    for (int k = 0; k < 4; ++k) {
      std::size_t used = 0;
      v[k] = std::stoi(id.substr(pos), &used);
      pos += used;
      if (k < 3) {
        if (pos >= id.size() || id[pos] != '_') return std::nullopt;
        ++pos;
      }
    }
    if (pos != id.size()) return std::nullopt;
  } catch (const std::exception&) {
    return std::nullopt;
  }
  p.bbox = BBox{v[0], v[1], v[2], v[3]};
  if (format_signature_id(p) != id) return std::nullopt;
  return p;
}

ClusterAssignment assign_truth(std::span<const std::string> ids, std::span<const TruthSignature> truth,
                               double iou_threshold) {
  ClusterAssignment a;
  std::map<std::string, int> authors;
  std::vector<int> raw;
  for (const auto& id : ids) {
    const auto prov = parse_signature_id(id);
    if (!prov) continue;
    double best = 0.0;
    const TruthSignature* match = nullptr;
    for (const auto& t : truth) {
      if (t.region.doc_id != prov->doc_id || t.region.page_index != prov->page_index) continue;
      const double o = eval::iou(t.region.bbox, prov->bbox);
      if (o >= iou_threshold && o > best) {
        best = o;
        match = &t;
      }
    }
    if (match == nullptr) continue;
    const auto [it, inserted] = authors.emplace(match->author, static_cast<int>(authors.size()));
    a.ids.push_back(id);
    raw.push_back(it->second);
  }
  a.labels = canonical_labels(raw);
  return a;
}

}  // namespace signet::pipeline
