#include <doctest.h>

#include <algorithm>

#include "signet/embed/embed.hpp"
#include "signet/synth/synth.hpp"
#include "signet/util/image_io.hpp"
#include "test_util.hpp"

using namespace signet;
using namespace signet::embed;

namespace {

const EncoderArch kTiny{{2, 4, 4, 8}};

std::vector<LabeledSignature> toy_signatures(int authors, int per_author) {
  std::vector<LabeledSignature> out;
  for (int a = 0; a < authors; ++a) {
    const auto style = synth::make_author(40 + static_cast<std::uint64_t>(a));
    for (int k = 0; k < per_author; ++k) {
      out.push_back({synth::signature_canvas(style, static_cast<std::uint64_t>(a * 100 + k)), "w" + std::to_string(a)});
    }
  }
  return out;
}

}  // namespace

TEST_CASE("match probability") {
  std::vector<float> e1{1.0F, 2.0F, -3.0F};
  std::vector<float> neg{-1.0F, -2.0F, 3.0F};
  std::vector<float> orth{2.0F, -1.0F, 0.0F};
  CHECK(match_probability(e1, e1) == doctest::Approx(1.0));
  CHECK(match_probability(e1, orth) == doctest::Approx(0.5));
  CHECK(match_probability(e1, neg) == doctest::Approx(0.0));
  std::vector<float> zero(3, 0.0F);
  CHECK_THROWS_AS(match_probability(e1, zero), DegenerateEmbedding);
  CHECK_THROWS_AS(cosine_similarity(e1, std::vector<float>{1.0F}), InvalidInput);
}

TEST_CASE("candidate pairs") {
  const std::vector<std::string> two{"a", "a", "b", "b"};
  const auto pairs = candidate_pairs(two, 1.0, 7);
  CHECK(std::count_if(pairs.begin(), pairs.end(), [](auto& p) { return p.label == 1; }) == 2);
  CHECK(std::count_if(pairs.begin(), pairs.end(), [](auto& p) { return p.label == 0; }) == 2);
  for (const auto& p : pairs) CHECK((two[p.first] == two[p.second]) == (p.label == 1));

  const auto pos_only = candidate_pairs(two, 0.0, 7);
  CHECK(pos_only.size() == 2);
  for (const auto& p : pos_only) CHECK(p.label == 1);

  // Asking for more negatives than exist returns all of them.
  CHECK(candidate_pairs(two, 10.0, 7).size() == 6);
  CHECK(candidate_pairs(two, 1.0, 7) == candidate_pairs(two, 1.0, 7));
  CHECK_THROWS_AS(candidate_pairs(two, -1.0, 7), InvalidInput);
}

TEST_CASE("build_pairs splits by author") {
  const auto sigs = toy_signatures(6, 2);
  const auto ds = build_pairs(sigs, 1.0, 3, 0.34);
  CHECK(ds.val_authors.size() == 2);
  CHECK(ds.train_authors.size() == 4);
  for (const auto& a : ds.val_authors) CHECK_FALSE(ds.train_authors.contains(a));
  CHECK(ds.train.size() == 8);  // 4 positives + 4 negatives
  CHECK(ds.val.size() == 4);

  const auto one = toy_signatures(1, 3);
  CHECK_THROWS_AS(build_pairs(one, 1.0, 3), DataError);
  // Validation never starves TRAIN below two authors.
  CHECK(build_pairs(toy_signatures(2, 2), 1.0, 3, 0.9).train_authors.size() == 2);
}

TEST_CASE("embedding inference") {
  const auto enc = EncoderModel::create(kTiny, 5);
  CHECK_FALSE(enc.pretrained());
  const auto a = synth::signature_canvas(synth::make_author(1), 1);
  auto b = synth::signature_canvas(synth::make_author(2), 2);
  b.provenance = Provenance{"doc", 3, BBox{1, 2, 30, 40}};
  const Embedding ea = embed::embed(enc, a);
  CHECK(ea.values().size() == static_cast<std::size_t>(kEmbeddingDim));
  CHECK(ea.values() == embed::embed(enc, a).values());
  const std::vector<SignatureImage> both{a, b};
  const auto batch = embed_batch(enc, both, 1);
  CHECK(batch[0].values() == ea.values());
  CHECK(batch[1].values() != ea.values());
  CHECK(batch[1].signature_id() == format_signature_id(b.provenance));

  SignatureImage wrong;
  wrong.pixels = GrayGrid(100, 100, 1.0F);
  CHECK_THROWS_AS(embed::embed(enc, wrong), InvalidInput);
}

TEST_CASE("siamese training") {
  SUBCASE("needs both labels") {
    PairDataset d;
    d.train.push_back({SignatureImage{}, SignatureImage{}, 1});
    CHECK_THROWS_AS(train_siamese(d, SiameseTrainOptions{}), DataError);
  }
  SUBCASE("loss falls on a toy set and checkpoints round trip") {
    const auto sigs = toy_signatures(2, 3);
    const auto ds = build_pairs(sigs, 1.0, 1, 0.0);
    SiameseTrainOptions o;
    o.epochs = 8;
    o.seed = 2;
    o.arch = kTiny;
    o.learning_rate = 1e-3F;
    auto res = train_siamese(ds, o);
    REQUIRE(res.history.size() == 8);
    CHECK(res.history.back().loss < res.history.front().loss);

    TempDir dir("enc");
    res.encoder.save((dir / "e.sgnm").string());
    const auto loaded = EncoderModel::load((dir / "e.sgnm").string());
    CHECK(embed::embed(loaded, sigs[0].image).values() == embed::embed(res.encoder, sigs[0].image).values());
    CHECK(pair_accuracy(loaded, ds.train) == pair_accuracy(res.encoder, ds.train));
  }
}

TEST_CASE("author directory") {
  TempDir dir("authors");
  for (const char* a : {"ann", "bob"}) {
    std::filesystem::create_directories(dir / a);
    io::write_png(dir / (std::string(a) + "/1.png"), GrayGrid(30, 10, 0.3F));
    io::write_png(dir / (std::string(a) + "/2.png"), GrayGrid(30, 10, 0.6F));
  }
  io::write_text(dir / "bob/readme.txt", "not an image");
  const auto sigs = load_author_directory(dir.path().string());
  REQUIRE(sigs.size() == 4);
  CHECK(sigs[0].author == "ann");
  CHECK(sigs[3].author == "bob");
  CHECK_THROWS_AS(load_author_directory((dir / "none").string()), SourceError);
}
