#include "signet/synth/toy_models.hpp"

#include <random>

#include <spdlog/spdlog.h>

#include "signet/core/canvas.hpp"
#include "signet/extract/extract.hpp"
#include "signet/ingest/font.hpp"
#include "signet/util/seed.hpp"

namespace signet::synth {

namespace {

// Printed lines like the ones surrounding signatures on a form.
SignatureImage text_canvas(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x7e7));
  const int scale = std::uniform_int_distribution<int>(2, 3)(rng);
  const std::string text =
      (rng() % 3 == 0) ? std::string("SIGNED") : random_words(seed, std::uniform_int_distribution<int>(1, 3)(rng));
  GrayGrid g(ingest::text_width(text, scale), 7 * scale, 1.0F);
  ingest::draw_text(g, 0, 0, text, scale, 0.1F);
  BBox box = ink_bbox(g);
  if (!box.valid()) box = BBox{0, 0, g.width() - 1, g.height() - 1};
  return normalize_to_canvas(crop_grid(g, box), Provenance{});
}

}  // namespace

ToyModels train_toy_models(std::span<const AuthorStyle> authors, const ToyModelOptions& o) {
  if (authors.size() < 2) throw InvalidInput("toy models need at least two authors");
  std::mt19937_64 rng(mix_seed(o.seed, 0x70));

  filter::LabeledRegionSet fset;
  for (int i = 0; i < o.filter_examples; ++i) {
    const AuthorStyle extra = make_author(mix_seed(o.seed, 9000 + i));
    const AuthorStyle& a = (i % 2 == 0) ? authors[static_cast<std::size_t>(i / 2) % authors.size()] : extra;
    const int width = std::uniform_int_distribution<int>(200, 300)(rng);
    fset.items.push_back({signature_canvas(a, mix_seed(o.seed, 7000 + i), width), 1, filter::Split::kTrain});
    fset.items.push_back({i % 2 == 0 ? text_canvas(mix_seed(o.seed, 8000 + i)) : clutter_canvas(mix_seed(o.seed, 8000 + i)),
                          0, filter::Split::kTrain});
  }
  // Candidates cut from generated forms, labelled by overlap with the planted
  // signatures, so the filter sees what extraction actually proposes.
  for (int d = 0; d < o.filter_documents; ++d) {
    std::vector<AuthorStyle> writers{make_author(mix_seed(o.seed, 9500 + 2 * d)), make_author(mix_seed(o.seed, 9501 + 2 * d))};
    const auto doc = make_document("toy" + std::to_string(d), writers, {0, 1}, mix_seed(o.seed, 9600 + d));
    const PageImage page{doc.doc_id, 0, doc.pages[0], 100};
    for (auto& c : extract::extract_candidates(page)) {
      int label = 0;
      for (const auto& s : doc.signatures[0]) label |= c.bbox.iou(s.bbox) >= 0.5 ? 1 : 0;
      fset.items.push_back({std::move(c.crop), label, filter::Split::kTrain});
    }
  }
  filter::FilterTrainOptions fo;
  fo.epochs = o.filter_epochs;
  fo.seed = mix_seed(o.seed, 1);
  fo.stop_at_train_accuracy = 1.0;
  auto fres = filter::train_filter(fset, fo);
  spdlog::info("toy filter: {} epochs, train accuracy {:.3f}", fres.history.size(),
               fres.history.empty() ? 0.0 : fres.history.back().train_accuracy);

  std::vector<embed::LabeledSignature> sigs;
  for (std::size_t a = 0; a < authors.size(); ++a) {
    for (int k = 0; k < o.encoder_instances; ++k) {
      const int width = std::uniform_int_distribution<int>(200, 300)(rng);
      sigs.push_back({signature_canvas(authors[a], mix_seed(o.seed, 20000 + a * 1000 + k), width), "a" + std::to_string(a)});
    }
  }
  const auto pairs = embed::build_pairs(sigs, 1.0, mix_seed(o.seed, 2), 0.0);
  embed::SiameseTrainOptions so;
  so.epochs = o.encoder_epochs;
  so.seed = mix_seed(o.seed, 3);
  auto sres = embed::train_siamese(pairs, so);
  spdlog::info("toy encoder: {} epochs, train pair accuracy {:.3f}", sres.history.size(),
               sres.history.empty() ? 0.0 : sres.history.back().train_accuracy);

  const StampSet stamps = stamp_set(2 * o.cleaner_examples, mix_seed(o.seed, 4), static_cast<int>(authors.size()));
  clean::CleanTrainingSet cset;
  for (int i = 0; i < o.cleaner_examples; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    cset.unpaired_x.push_back(stamps.stamped[ui]);
    cset.unpaired_y.push_back(stamps.clean[ui + static_cast<std::size_t>(o.cleaner_examples)]);
    cset.paired.emplace_back(stamps.stamped[ui], stamps.clean[ui]);
  }
  clean::CleanerTrainOptions co;
  co.epochs = o.cleaner_epochs;
  co.seed = mix_seed(o.seed, 5);
  co.arch = o.cleaner_arch;
  auto cres = clean::train_cleaner(cset, co);

  return ToyModels{std::move(fres.model), std::move(cres.model), std::move(sres.encoder)};
}

ToyModelPaths save_toy_models(ToyModels& models, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ToyModelPaths p{dir / "filter.sgnm", dir / "cleaner.sgnm", dir / "encoder.sgnm"};
  models.filter.save(p.filter.string());
  models.cleaner.save(p.cleaner.string());
  models.encoder.save(p.encoder.string());
  return p;
}

}  // namespace signet::synth
