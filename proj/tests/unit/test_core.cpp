#include <doctest.h>

#include <random>

#include "signet/core/canvas.hpp"
#include "signet/core/config.hpp"
#include "signet/core/types.hpp"
#include "signet/util/binary.hpp"
#include "signet/util/digest.hpp"

using namespace signet;

TEST_CASE("bbox geometry") {
  const BBox a{0, 0, 9, 9};
  const BBox b{5, 5, 14, 14};
  CHECK(a.area() == 100);
  CHECK(a.intersection_area(b) == 25);
  CHECK(a.iou(b) == doctest::Approx(25.0 / 175.0));
  CHECK(a.iou(a) == 1.0);
  CHECK(a.gap(b) == 0);
  CHECK(a.gap(BBox{12, 0, 20, 3}) == 2);
  CHECK(a.gap(BBox{13, 15, 20, 20}) == 5);  // Chebyshev: max of the axis gaps
  CHECK(a.envelope(b) == BBox{0, 0, 14, 14});
  BBox e = empty_bbox();
  CHECK_FALSE(e.valid());
  e.include(3, 4);
  CHECK(e == BBox{3, 4, 3, 4});
}

TEST_CASE("canonical labels and assignment validation") {
  const std::vector<int> raw{7, 7, 3, 9, 3};
  CHECK(canonical_labels(raw) == std::vector<int>{0, 0, 1, 2, 1});

  ClusterAssignment a{{"a", "b", "c"}, {0, 0, 1}, 0.5};
  CHECK_NOTHROW(a.validate());
  CHECK(a.cluster_count() == 2);
  a.labels = {0, 0, 2};
  CHECK_THROWS_AS(a.validate(), InvalidInput);
  a.labels = {0, 0, 1};
  a.ids = {"a", "a", "c"};
  CHECK_THROWS_AS(a.validate(), InvalidInput);
}

TEST_CASE("embedding invariants") {
  CHECK_THROWS_AS(Embedding(Vector(kEmbeddingDim, 0.0F)), DegenerateEmbedding);
  CHECK_THROWS(Embedding(Vector(10, 1.0F)));
  Vector v(kEmbeddingDim, 0.0F);
  v[3] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS(Embedding(v));
  v[3] = 1.0F;
  CHECK(Embedding(v, "x").signature_id() == "x");
}

TEST_CASE("signature image shape contract") {
  SignatureImage s;
  CHECK_NOTHROW(s.validate());
  s.pixels = GrayGrid(128, 128, 1.0F);
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  s.pixels = GrayGrid(kCanvasSize, kCanvasSize, 1.5F);
  CHECK_THROWS_AS(s.validate(), InvalidInput);
}

TEST_CASE("normalize_to_canvas") {
  SUBCASE("white canvas is unchanged") {
    const GrayGrid white(256, 256, 1.0F);
    CHECK(normalize_to_canvas(white).pixels == white);
  }
  SUBCASE("idempotent on its own output") {
    GrayGrid g(90, 40, 1.0F);
    for (int x = 10; x < 80; ++x) g(x, 20) = 0.0F;
    const auto once = normalize_to_canvas(g);
    CHECK(normalize_to_canvas(once.pixels).pixels == once.pixels);
  }
  SUBCASE("tall crop is centred horizontally") {
    GrayGrid g(128, 256, 0.0F);
    const auto s = normalize_to_canvas(g);
    for (int y = 0; y < 256; ++y) {
      CHECK(s.pixels(63, y) == 1.0F);
      CHECK(s.pixels(64, y) == 0.0F);
      CHECK(s.pixels(191, y) == 0.0F);
      CHECK(s.pixels(192, y) == 1.0F);
    }
  }
  SUBCASE("downsampled corner pixel stays in the corner") {
    GrayGrid g(512, 512, 1.0F);
    g(0, 0) = 0.0F;
    const auto s = normalize_to_canvas(g);
    CHECK(s.pixels(0, 0) == doctest::Approx(0.75));
    float min_rest = 1.0F;
    for (int y = 0; y < 256; ++y) {
      for (int x = 0; x < 256; ++x) {
        if (x || y) min_rest = std::min(min_rest, s.pixels(x, y));
      }
    }
    CHECK(min_rest == 1.0F);
  }
  SUBCASE("provenance and state") {
    const auto s = normalize_to_canvas(GrayGrid(10, 10, 0.5F), Provenance{"d", 2, BBox{1, 1, 10, 10}});
    CHECK(s.state == SignatureState::kRaw);
    CHECK(s.provenance.doc_id == "d");
    CHECK(s.provenance.page_index == 2);
  }
  CHECK_THROWS_AS(normalize_to_canvas(GrayGrid{}), InvalidInput);
}

TEST_CASE("resample_area keeps mean and range") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> d(0.0F, 1.0F);
  GrayGrid g(60, 30);
  double mean = 0.0;
  for (float& v : g.cells()) {
    v = d(rng);
    mean += v;
  }
  mean /= static_cast<double>(g.size());
  const GrayGrid r = resample_area(g, 20, 10);  // exact 3x3 blocks
  double rmean = 0.0;
  for (float v : r.cells()) {
    CHECK(v >= 0.0F);
    CHECK(v <= 1.0F);
    rmean += v;
  }
  CHECK(rmean / static_cast<double>(r.size()) == doctest::Approx(mean).epsilon(1e-5));
  double block = 0.0;
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) block += g(x, y);
  }
  CHECK(r(0, 0) == doctest::Approx(block / 9.0).epsilon(1e-5));
}

TEST_CASE("config validation") {
  CHECK(validate_config("") == PipelineConfig{});
  CHECK(validate_config("{}") == PipelineConfig{});
  CHECK(validate_config(R"({"t": 0.2})").t == 0.2);

  auto field_of = [](const std::string& raw) {
    try {
      validate_config(raw);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of(R"({"cnn_threshold": 1.5})") == "cnn_threshold");
  CHECK(field_of(R"({"t": 2.5})") == "t");
  CHECK(field_of(R"({"density": {"min": 0.5, "max": 0.1}})") == "density");
  CHECK(field_of(R"({"nope": 1})") == "nope");
  CHECK(field_of(R"({"models": {"gpu": "x"}})") == "models.gpu");
  CHECK(field_of(R"({"workers": 0})") == "workers");
  CHECK(field_of("[1,2]") == "<document>");
  CHECK(field_of("{") == "<document>");

  PipelineConfig c;
  c.t = 0.37;
  c.binarization = Binarization::kAdaptive;
  c.keywords = {"filed"};
  c.filter_model = "f.sgnm";
  CHECK(validate_config(to_json(c)) == c);
}

TEST_CASE("binary reader flags short reads") {
  binary::Writer w;
  w.u16(0xBEEF);
  w.f64(1.25);
  binary::Reader r(w.bytes());
  CHECK(r.u16() == 0xBEEF);
  CHECK(r.f64() == 1.25);
  CHECK(r.ok());
  CHECK(r.u32() == 0);
  CHECK_FALSE(r.ok());
}

TEST_CASE("digest is order sensitive and stable") {
  CHECK(Digest().update("ab").value() != Digest().update("ba").value());
  CHECK(Digest().update("").value() == 0xcbf29ce484222325ULL);
  CHECK(Digest().update("a").hex() == "af63dc4c8601ec8c");
}
