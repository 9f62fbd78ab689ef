// signet: command-line front end for the signature pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "signet/clean/clean.hpp"
#include "signet/cluster/cluster.hpp"
#include "signet/core/canvas.hpp"
#include "signet/core/config.hpp"
#include "signet/core/errors.hpp"
#include "signet/embed/embed.hpp"
#include "signet/eval/eval.hpp"
#include "signet/filter/filter.hpp"
#include "signet/pipeline/pipeline.hpp"
#include "signet/store/index.hpp"
#include "signet/synth/toy_models.hpp"
#include "signet/util/image_io.hpp"
#include "signet/util/seed.hpp"

namespace fs = std::filesystem;
using namespace signet;

namespace {

struct Globals {
  std::string config_path;
  std::string workdir = "work";
  std::optional<unsigned long long> seed;
  std::optional<int> workers;
  bool verbose = false;
};

PipelineConfig effective_config(const Globals& g) {
  PipelineConfig cfg = load_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  if (g.workers) {
    if (*g.workers < 1) throw ConfigError("--workers", "must be at least 1");
    cfg.workers = *g.workers;
  }
  return cfg;
}

void print_summary(const pipeline::RunSummary& s) {
  std::printf("documents   %zu (%zu failed)\n", s.documents, s.documents_failed);
  std::printf("pages       %zu (%zu gated)\n", s.pages, s.pages_gated);
  std::printf("candidates  %zu\n", s.candidates);
  std::printf("kept        %zu\n", s.kept);
  std::printf("signatures  %zu\n", s.signatures);
  std::printf("clusters    %d\n", s.clusters);
  if (!s.reused_stages.empty()) {
    std::string r;
    for (const auto& st : s.reused_stages) r += (r.empty() ? "" : ",") + st;
    std::printf("reused      %s\n", r.c_str());
  }
  for (const auto& e : s.errors) std::printf("skipped     %s\n", e.c_str());
  if (!s.clusters_tsv.empty()) std::printf("clusters    -> %s\n", s.clusters_tsv.string().c_str());
}

std::vector<pipeline::TruthSignature> read_truth_regions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SourceError("cannot read " + path.string());
  std::vector<pipeline::TruthSignature> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    pipeline::TruthSignature t;
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ss, field, '\t')) f.push_back(field);
    if (f.size() != 7) throw FormatError("truth regions need 7 fields: doc page x0 y0 x1 y1 author");
    t.region.doc_id = f[0];
    t.region.page_index = std::stoi(f[1]);
    t.region.bbox = BBox{std::stoi(f[2]), std::stoi(f[3]), std::stoi(f[4]), std::stoi(f[5])};
    t.author = f[6];
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"signet: signature extraction, embedding and clustering for scanned documents"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON pipeline config");
  app.add_option("--workdir", g.workdir, "Work directory for stage outputs");
  app.add_option("--seed", g.seed, "Override the config seed");
  app.add_option("--workers", g.workers, "Override the worker count");
  app.add_flag("-v,--verbose", g.verbose, "Debug logging");

  std::function<int()> action;

  // ---- pipeline stages
  std::string source;
  auto* run = app.add_subcommand("run", "Run every stage over a document directory");
  run->add_option("--source", source, "Document directory")->required();
  run->callback([&] {
    action = [&] {
      print_summary(pipeline::run_pipeline(effective_config(g), source, g.workdir));
      return 0;
    };
  });

  auto* ingest = app.add_subcommand("ingest", "Render pages and apply the OCR gate");
  ingest->add_option("--source", source, "Document directory")->required();
  ingest->callback([&] {
    action = [&] {
      pipeline::Pipeline p(effective_config(g), g.workdir);
      p.ingest(source);
      p.write_telemetry();
      print_summary(p.summary());
      return 0;
    };
  });

  auto stage_cmd = [&](const char* name, const char* help, auto fn) {
    auto* sc = app.add_subcommand(name, help);
    sc->add_option("--in", g.workdir, "Work directory (same as --workdir)");
    sc->callback([&, fn] {
      action = [&, fn] {
        pipeline::Pipeline p(effective_config(g), g.workdir);
        fn(p);
        p.write_telemetry();
        print_summary(p.summary());
        return 0;
      };
    });
  };
  stage_cmd("extract", "Propose candidate regions from ingested pages", [](pipeline::Pipeline& p) { p.extract(); });
  stage_cmd("filter", "Score candidates with the CNN filter", [](pipeline::Pipeline& p) {
    p.load_models();
    p.filter();
  });
  stage_cmd("clean", "Clean kept candidates with the cleaner", [](pipeline::Pipeline& p) {
    p.load_models();
    p.clean();
  });
  stage_cmd("embed", "Embed cleaned signatures into the index", [](pipeline::Pipeline& p) {
    p.load_models();
    p.embed();
  });

  // ---- cluster an index
  std::string index_path;
  std::string out_path;
  std::optional<double> t_opt;
  auto* clus = app.add_subcommand("cluster", "Cluster an embedding index");
  clus->add_option("--index", index_path, "Index file (default <workdir>/embed/index.sgnt)");
  clus->add_option("--t", t_opt, "Distance threshold in [0,2]");
  clus->add_option("--out", out_path, "Output TSV (default <workdir>/clusters.tsv)");
  clus->callback([&] {
    action = [&] {
      PipelineConfig cfg = effective_config(g);
      if (t_opt) cfg.t = *t_opt;
      if (index_path.empty()) {
        pipeline::Pipeline p(cfg, g.workdir);
        const auto a = p.cluster();
        p.write_telemetry();
        if (!out_path.empty()) eval::write_assignment_tsv(a, out_path);
        std::printf("%zu signatures, %d clusters\n", a.size(), a.cluster_count());
        return 0;
      }
      const auto records = store::load_index(index_path);
      ClusterAssignment a;
      a.threshold_t = cfg.t;
      if (!records.empty()) {
        std::vector<Embedding> embs;
        for (const auto& r : records) embs.emplace_back(r.dequantize(), r.signature_id);
        a = cluster::cluster(embs, cfg.t).first;
      }
      const fs::path out = out_path.empty() ? fs::path(g.workdir) / "clusters.tsv" : fs::path(out_path);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      eval::write_assignment_tsv(a, out);
      std::printf("%zu signatures, %d clusters -> %s\n", a.size(), a.cluster_count(), out.string().c_str());
      return 0;
    };
  });

  // ---- evaluation
  std::string pred_path;
  std::string truth_path;
  std::string truth_regions;
  auto* ev = app.add_subcommand("evaluate", "Compare a clustering with ground truth");
  ev->add_option("--pred", pred_path, "Predicted clusters TSV")->required();
  auto* truth_opt = ev->add_option("--truth", truth_path, "Truth TSV (signature_id, author_id)");
  auto* region_opt =
      ev->add_option("--truth-regions", truth_regions, "Truth regions TSV (doc page x0 y0 x1 y1 author), matched by IoU");
  truth_opt->excludes(region_opt);
  ev->callback([&] {
    action = [&] {
      const ClusterAssignment pred = eval::read_assignment_tsv(pred_path);
      ClusterAssignment truth;
      if (!truth_path.empty()) {
        truth = eval::read_assignment_tsv(truth_path);
      } else if (!truth_regions.empty()) {
        truth = pipeline::assign_truth(pred.ids, read_truth_regions(truth_regions));
        if (truth.size() != pred.size()) {
          std::fprintf(stderr, "%zu of %zu predicted signatures match no truth region\n", pred.size() - truth.size(),
                       pred.size());
          return static_cast<int>(ExitCode::kData);
        }
      } else {
        throw InvalidInput("evaluate needs --truth or --truth-regions");
      }
      const auto c = eval::pair_confusion(pred, truth);
      std::printf("pairs  TP %llu  TN %llu  FP %llu  FN %llu\n", static_cast<unsigned long long>(c.tp),
                  static_cast<unsigned long long>(c.tn), static_cast<unsigned long long>(c.fp),
                  static_cast<unsigned long long>(c.fn));
      std::printf("rand_index           %.4f\n", eval::rand_index(pred, truth));
      std::printf("adjusted_rand_index  %.4f\n", eval::adjusted_rand_index(pred, truth));
      std::printf("clusters pred %d truth %d\n", pred.cluster_count(), truth.cluster_count());
      return 0;
    };
  });

  std::string scores_path;
  auto* roc = app.add_subcommand("roc", "ROC curve from (score, label) rows");
  roc->add_option("--scores", scores_path, "TSV of score<TAB>label")->required();
  roc->add_option("--out", out_path, "Plot-ready point file (fpr tpr threshold)");
  roc->callback([&] {
    action = [&] {
      std::ifstream in(scores_path);
      if (!in) throw SourceError("cannot read " + scores_path);
      std::vector<double> scores;
      std::vector<int> labels;
      double s = 0.0;
      int l = 0;
      while (in >> s >> l) {
        scores.push_back(s);
        labels.push_back(l);
      }
      const auto curve = eval::roc_curve(scores, labels);
      if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << "fpr\ttpr\tthreshold\n";
        for (const auto& p : curve.points) out << p.fpr << '\t' << p.tpr << '\t' << p.threshold << '\n';
      }
      std::printf("auc %.6f over %zu points\n", curve.auc, curve.points.size());
      return 0;
    };
  });

  std::string telemetry_path;
  bool as_json = false;
  auto* rep = app.add_subcommand("report", "Time and space report from run telemetry");
  rep->add_option("--telemetry", telemetry_path, "Telemetry TSV (default <workdir>/telemetry.tsv)");
  rep->add_flag("--json", as_json, "Machine-readable output");
  rep->callback([&] {
    action = [&] {
      const fs::path p = telemetry_path.empty() ? fs::path(g.workdir) / "telemetry.tsv" : fs::path(telemetry_path);
      const auto r = eval::scalability_report(eval::read_telemetry(p));
      std::cout << (as_json ? eval::to_json(r).dump(2) + "\n" : eval::to_text(r));
      return 0;
    };
  });

  // ---- search
  std::string query_path;
  std::string encoder_path;
  auto* se = app.add_subcommand("search", "Find indexed signatures close to a query image");
  se->add_option("--query", query_path, "Query image (a signature crop)")->required();
  se->add_option("--index", index_path, "Index file")->required();
  se->add_option("--encoder", encoder_path, "Encoder checkpoint (default from config)");
  se->add_option("--t", t_opt, "Distance threshold");
  se->callback([&] {
    action = [&] {
      const PipelineConfig cfg = effective_config(g);
      const std::string enc_path = encoder_path.empty() ? cfg.encoder_model : encoder_path;
      if (!fs::is_regular_file(enc_path)) throw StartupError("encoder model not found: " + enc_path);
      const auto enc = embed::EncoderModel::load(enc_path);
      const auto records = store::load_index(index_path);
      const SignatureImage q = normalize_to_canvas(io::read_gray(query_path), Provenance{query_path, 0, {}});
      for (const auto& h : store::search(q, records, enc, t_opt.value_or(cfg.t))) {
        std::printf("%d\t%.6f\t%s\n", h.rank, h.distance, h.signature_id.c_str());
      }
      return 0;
    };
  });

  // ---- training
  std::string data_dir;
  int epochs = 0;
  double ratio = 1.0;
  double val_fraction = 0.2;
  auto* tf = app.add_subcommand("train-filter", "Train the region filter on <data>/positive and <data>/negative");
  tf->add_option("--data", data_dir)->required();
  tf->add_option("--epochs", epochs)->default_val(200);
  tf->add_option("--out", out_path)->required();
  tf->callback([&] {
    action = [&] {
      const PipelineConfig cfg = effective_config(g);
      filter::FilterTrainOptions o;
      o.epochs = epochs;
      o.seed = cfg.seed;
      auto res = filter::train_filter(filter::load_labeled_directory(data_dir, 5), o);
      for (const auto& e : res.history) {
        std::printf("epoch %d loss %.4f train %.3f val %s\n", e.epoch, e.loss, e.train_accuracy,
                    e.val_accuracy ? std::to_string(*e.val_accuracy).c_str() : "n/a");
      }
      res.model.save(out_path);
      return 0;
    };
  });

  auto* tc = app.add_subcommand("train-cleaner", "Train the cleaner on <data>/raw, <data>/clean and <data>/paired");
  tc->add_option("--data", data_dir)->required();
  tc->add_option("--epochs", epochs)->default_val(200);
  tc->add_option("--out", out_path)->required();
  tc->callback([&] {
    action = [&] {
      const PipelineConfig cfg = effective_config(g);
      clean::CleanerTrainOptions o;
      o.epochs = epochs;
      o.seed = cfg.seed;
      o.lambda_cyc = cfg.lambda_cyc;
      o.lambda_pair = cfg.lambda_pair;
      auto res = clean::train_cleaner(clean::load_clean_directory(data_dir), o);
      for (const auto& e : res.history) {
        std::printf("epoch %d G %.4f D %.4f cycle %.5f paired %.5f\n", e.epoch, e.generator, e.discriminator, e.cycle,
                    e.paired);
      }
      res.model.save(out_path);
      return 0;
    };
  });

  auto* ts = app.add_subcommand("train-siamese", "Train the encoder on <data>/<author>/ images");
  ts->add_option("--data", data_dir)->required();
  ts->add_option("--epochs", epochs)->default_val(100);
  ts->add_option("--ratio", ratio, "Negative pairs per positive pair");
  ts->add_option("--val-fraction", val_fraction, "Share of authors held out");
  ts->add_option("--out", out_path)->required();
  ts->callback([&] {
    action = [&] {
      const PipelineConfig cfg = effective_config(g);
      const auto pairs = embed::build_pairs(embed::load_author_directory(data_dir), ratio, cfg.seed, val_fraction);
      embed::SiameseTrainOptions o;
      o.epochs = epochs;
      o.seed = cfg.seed;
      auto res = embed::train_siamese(pairs, o);
      for (const auto& e : res.history) {
        std::printf("epoch %d loss %.4f train %.3f val %s\n", e.epoch, e.loss, e.train_accuracy,
                    e.val_accuracy ? std::to_string(*e.val_accuracy).c_str() : "n/a");
      }
      res.encoder.save(out_path);
      return 0;
    };
  });

  // ---- synthetic data
  int docs = 3;
  int n_authors = 2;
  int sigs_per_doc = 2;
  std::string models_dir;
  auto* sy = app.add_subcommand("synth", "Write generated documents with ground truth");
  sy->add_option("--out", out_path, "Output directory")->required();
  sy->add_option("--docs", docs);
  sy->add_option("--authors", n_authors);
  sy->add_option("--signatures", sigs_per_doc, "Signatures per document");
  sy->add_option("--models", models_dir, "Also train toy models into this directory");
  sy->callback([&] {
    action = [&] {
      const PipelineConfig cfg = effective_config(g);
      if (n_authors < 1 || docs < 0 || sigs_per_doc < 0) throw InvalidInput("counts must be positive");
      std::vector<synth::AuthorStyle> authors;
      for (int a = 0; a < n_authors; ++a) authors.push_back(synth::make_author(mix_seed(cfg.seed, 100 + a)));
      const fs::path out(out_path);
      fs::create_directories(out / "docs");
      std::ofstream truth(out / "truth_regions.tsv");
      for (int d = 0; d < docs; ++d) {
        std::vector<int> signers;
        for (int k = 0; k < sigs_per_doc; ++k) signers.push_back((d + k) % n_authors);
        const auto kind = static_cast<synth::FileKind>(d % 3);
        const char* ext = d % 3 == 0 ? ".png" : d % 3 == 1 ? ".tif" : ".pdf";
        const auto doc = synth::make_document("doc" + std::to_string(d) + ext, authors, signers, mix_seed(cfg.seed, 1000 + d));
        synth::write_document(doc, out / "docs", kind, cfg.dpi);
        for (std::size_t p = 0; p < doc.signatures.size(); ++p) {
          for (const auto& s : doc.signatures[p]) {
            truth << doc.doc_id << '\t' << p << '\t' << s.bbox.x_min << '\t' << s.bbox.y_min << '\t' << s.bbox.x_max
                  << '\t' << s.bbox.y_max << "\tauthor" << s.author << '\n';
          }
        }
      }
      std::printf("%d documents -> %s\n", docs, (out / "docs").string().c_str());
      if (!models_dir.empty()) {
        synth::ToyModelOptions o;
        o.seed = cfg.seed;
        auto models = synth::train_toy_models(authors, o);
        const auto paths = synth::save_toy_models(models, models_dir);
        std::printf("models -> %s, %s, %s\n", paths.filter.string().c_str(), paths.cleaner.string().c_str(),
                    paths.encoder.string().c_str());
      }
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }
  spdlog::set_level(g.verbose ? spdlog::level::debug : spdlog::level::info);
  try {
    return action ? action() : 0;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(ExitCode::kData);
  }
}
