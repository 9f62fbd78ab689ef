#include <doctest.h>

#include <cmath>

#include "signet/clean/clean.hpp"
#include "signet/synth/synth.hpp"
#include "signet/util/image_io.hpp"
#include "test_util.hpp"

using namespace signet;
using namespace signet::clean;
using nn::Tensor;

namespace {

const CleanerArch kTiny{.ngf = 2, .ndf = 2, .residual_blocks = 1, .output_gain = 0.1F};

Tensor constant(int n, int h, int w, float v) { return Tensor(n, 1, h, w, v); }

const ImageMap kIdentity = [](const Tensor& t) { return t; };
const ImageMap kZero = [](const Tensor& t) { return Tensor(t.n(), t.c(), t.h(), t.w(), 0.0F); };
const ImageMap kComplement = [](const Tensor& t) {
  Tensor out = t;
  for (float& v : out.values()) v = 1.0F - v;
  return out;
};

}  // namespace

TEST_CASE("cycle loss closed forms") {
  SUBCASE("single pixel through constant-zero maps") {
    const Tensor x = constant(1, 1, 1, 0.3F);
    const Tensor y = constant(1, 1, 1, 0.8F);
    const double want = static_cast<double>(0.3F) + static_cast<double>(0.8F);
    CHECK(std::abs(cycle_loss(kZero, kZero, x, y) - want) <= 1e-9);
    CHECK(std::abs(cycle_loss(kZero, kZero, constant(1, 1, 1, 0.25F), constant(1, 1, 1, 0.75F)) - 1.0) <= 1e-9);
  }
  SUBCASE("identity generators give exactly zero") {
    Tensor x(3, 1, 4, 5);
    for (std::size_t i = 0; i < x.size(); ++i) x.values()[i] = static_cast<float>(i % 7) / 7.0F;
    CHECK(cycle_loss(kIdentity, kIdentity, x, x) == 0.0);
    CHECK(cycle_loss(kIdentity, kIdentity, x, x, PixelReduction::kMean) == 0.0);
  }
  SUBCASE("identity and complement on constant images") {
    // F(G(x)) = 1 - x, G(F(y)) = 1 - y.
    CHECK(cycle_loss(kIdentity, kComplement, constant(2, 3, 3, 0.5F), constant(2, 3, 3, 0.5F)) == 0.0);
    const Tensor x = constant(2, 2, 2, 0.25F);
    const Tensor y = constant(2, 2, 2, 0.875F);
    // Per pixel |0.75 - 0.25| + |0.125 - 0.875| = 1.25 over 4 pixels.
    CHECK(std::abs(cycle_loss(kIdentity, kComplement, x, y) - 5.0) <= 1e-9);
    CHECK(std::abs(cycle_loss(kIdentity, kComplement, x, y, PixelReduction::kMean) - 1.25) <= 1e-9);
  }
  SUBCASE("batch mean over unequal batch sizes") {
    Tensor x(2, 1, 1, 1);
    x.values()[0] = 0.5F;
    x.values()[1] = 1.0F;
    const Tensor y = constant(1, 1, 1, 0.25F);
    CHECK(std::abs(cycle_loss(kZero, kZero, x, y) - (0.75 + 0.25)) <= 1e-9);
  }
  SUBCASE("swapping roles swaps terms") {
    const Tensor x = constant(1, 2, 2, 0.125F);
    const Tensor y = constant(1, 2, 2, 0.625F);
    CHECK(cycle_loss(kZero, kComplement, x, y) == cycle_loss(kComplement, kZero, y, x));
  }
  SUBCASE("shape changes are rejected") {
    const ImageMap shrink = [](const Tensor& t) { return Tensor(t.n(), t.c(), t.h() / 2, t.w() / 2); };
    CHECK_THROWS_AS(cycle_loss(shrink, kIdentity, constant(1, 4, 4, 0.5F), constant(1, 4, 4, 0.5F)), InvalidInput);
    CHECK_THROWS_AS(cycle_loss(kIdentity, kIdentity, Tensor{}, constant(1, 4, 4, 0.5F)), InvalidInput);
  }
}

TEST_CASE("cleaner inference") {
  const auto model = CleanerModel::create(kTiny, 4);
  auto img = synth::signature_canvas(synth::make_author(1), 2);
  img.provenance = Provenance{"doc", 1, BBox{5, 5, 50, 30}};
  const auto a = clean::clean(model, img);
  CHECK(a.state == SignatureState::kCleaned);
  CHECK(a.provenance == img.provenance);
  CHECK(a.pixels == clean::clean(model, img).pixels);
  for (float v : a.pixels.cells()) {
    CHECK(v >= 0.0F);
    CHECK(v <= 1.0F);
  }
  const std::vector<SignatureImage> two{img, SignatureImage{}};
  const auto batch = clean_batch(model, two, 1);
  REQUIRE(batch.size() == 2);
  CHECK(batch[0].pixels == a.pixels);

  // Small output gain keeps an untrained generator close to the identity.
  double l1 = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) l1 += std::abs(a.pixels.cells()[i] - img.pixels.cells()[i]);
  CHECK(l1 / static_cast<double>(a.pixels.size()) < 0.1);

  SignatureImage wrong;
  wrong.pixels = GrayGrid(64, 64, 1.0F);
  CHECK_THROWS_AS(clean::clean(model, wrong), InvalidInput);
  const std::vector<SignatureImage> xs{img};
  CHECK(cycle_loss(model, xs, xs) >= 0.0);
}

TEST_CASE("cleaner training") {
  const auto stamps = synth::stamp_set(4, 8);
  CleanTrainingSet set;
  set.unpaired_x = {stamps.stamped[0], stamps.stamped[1]};
  set.unpaired_y = {stamps.clean[2], stamps.clean[3]};
  CleanerTrainOptions o;
  o.epochs = 1;
  o.seed = 1;
  o.arch = kTiny;

  SUBCASE("pure unpaired mode") {
    o.lambda_pair = 0.0;
    const auto res = train_cleaner(set, o);
    REQUIRE(res.history.size() == 1);
    CHECK(std::isfinite(res.history[0].cycle));
    CHECK(res.history[0].paired == 0.0);
  }
  SUBCASE("paired mixture and checkpoint round trip") {
    set.paired.emplace_back(stamps.stamped[2], stamps.clean[2]);
    auto res = train_cleaner(set, o);
    CHECK(res.history[0].paired > 0.0);
    TempDir dir("cleaner");
    res.model.save((dir / "c.sgnm").string());
    const auto loaded = CleanerModel::load((dir / "c.sgnm").string());
    CHECK(clean::clean(loaded, stamps.stamped[0]).pixels == clean::clean(res.model, stamps.stamped[0]).pixels);
  }
  SUBCASE("empty unpaired sets") {
    set.unpaired_y.clear();
    CHECK_THROWS_AS(train_cleaner(set, o), DataError);
  }
  SUBCASE("decay start outside [0, 1]") {
    o.decay_start = 1.5;
    CHECK_THROWS_AS(train_cleaner(set, o), InvalidInput);
  }
}

TEST_CASE("stamp set pairs share the signature") {
  const auto s = synth::stamp_set(3, 2);
  REQUIRE(s.clean.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    double ink_clean = 0;
    double ink_stamped = 0;
    for (float v : s.clean[i].pixels.cells()) ink_clean += 1.0 - v;
    for (float v : s.stamped[i].pixels.cells()) ink_stamped += 1.0 - v;
    CHECK(ink_stamped > ink_clean);
    // Stamping only darkens.
    for (std::size_t k = 0; k < s.clean[i].pixels.size(); ++k) {
      CHECK(s.stamped[i].pixels.cells()[k] <= s.clean[i].pixels.cells()[k] + 1e-6F);
    }
  }
}

TEST_CASE("clean directory layout") {
  TempDir dir("cleandata");
  for (const char* sub : {"raw", "clean", "paired/raw", "paired/clean"}) std::filesystem::create_directories(dir / sub);
  io::write_png(dir / "raw/a.png", GrayGrid(20, 10, 0.5F));
  io::write_png(dir / "clean/b.png", GrayGrid(20, 10, 0.9F));
  io::write_png(dir / "paired/raw/p.png", GrayGrid(20, 10, 0.4F));
  io::write_png(dir / "paired/clean/p.png", GrayGrid(20, 10, 0.8F));
  io::write_png(dir / "paired/raw/orphan.png", GrayGrid(20, 10, 0.4F));
  const auto set = load_clean_directory(dir.path().string());
  CHECK(set.unpaired_x.size() == 1);
  CHECK(set.unpaired_y.size() == 1);
  CHECK(set.paired.size() == 1);
}
