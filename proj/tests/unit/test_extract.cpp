#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "signet/extract/extract.hpp"
#include "signet/synth/synth.hpp"
#include "signet/util/image_io.hpp"

using namespace signet;
using namespace signet::extract;

namespace {

BinaryImage mask_of(int w, int h, std::initializer_list<std::pair<int, int>> on) {
  BinaryImage b{MaskGrid(w, h, 0), "d", 0};
  for (auto [x, y] : on) b.pixels(x, y) = 1;
  return b;
}

Region block(int x0, int y0, int w, int h) {
  Region r;
  for (int y = y0; y < y0 + h; ++y) {
    for (int x = x0; x < x0 + w; ++x) {
      r.pixels.push_back({x, y});
      r.bbox.include(x, y);
    }
  }
  return r;
}

// Between-class variance maximizer over every split, for comparison.
int otsu_sweep(const GrayGrid& g) {
  std::vector<int> levels;
  for (float v : g.cells()) levels.push_back(io::to_byte(v));
  double best = 0;
  int arg = -1;
  for (int k = 0; k < 255; ++k) {
    double n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (int l : levels) {
      if (l <= k) {
        n0 += 1;
        s0 += l;
      } else {
        n1 += 1;
        s1 += l;
      }
    }
    if (n0 == 0 || n1 == 0) continue;
    const double between = n0 * n1 * (s0 / n0 - s1 / n1) * (s0 / n0 - s1 / n1);
    if (between > best * (1 + 1e-12)) {
      best = between;
      arg = k;
    }
  }
  return arg;
}

}  // namespace

TEST_CASE("binarize") {
  SUBCASE("white page has no foreground") {
    const auto b = binarize(PageImage{"d", 0, GrayGrid(30, 20, 1.0F), 100});
    for (auto v : b.pixels.cells()) CHECK(v == 0);
  }
  SUBCASE("black half is foreground") {
    GrayGrid g(20, 10, 1.0F);
    for (int y = 0; y < 10; ++y) {
      for (int x = 0; x < 10; ++x) g(x, y) = 0.0F;
    }
    const auto b = binarize(PageImage{"d", 0, g, 100});
    for (int y = 0; y < 10; ++y) {
      for (int x = 0; x < 20; ++x) CHECK(b.pixels(x, y) == (x < 10 ? 1 : 0));
    }
  }
  SUBCASE("two-mode page splits exactly at the modes") {
    GrayGrid g(50, 20, 0.9F);
    std::mt19937 rng(4);
    std::vector<int> idx(g.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < g.size() / 10; ++i) g.cells()[static_cast<std::size_t>(idx[i])] = 0.2F;
    CHECK(otsu_level(g) == otsu_sweep(g));
    const auto b = binarize(PageImage{"d", 0, g, 100});
    for (std::size_t i = 0; i < g.size(); ++i) CHECK((b.pixels.cells()[i] == 1) == (g.cells()[i] == 0.2F));
  }
  SUBCASE("otsu agrees with the sweep on random histograms") {
    std::mt19937 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
      GrayGrid g(16, 16);
      std::uniform_real_distribution<float> d(0.0F, 1.0F);
      for (float& v : g.cells()) v = d(rng) < 0.3F ? d(rng) * 0.4F : 0.6F + d(rng) * 0.4F;
      CHECK(otsu_level(g) == otsu_sweep(g));
    }
  }
  SUBCASE("adaptive picks dark strokes on a shaded page") {
    GrayGrid g(100, 100);
    for (int y = 0; y < 100; ++y) {
      for (int x = 0; x < 100; ++x) g(x, y) = 0.5F + 0.5F * static_cast<float>(x) / 100.0F;
    }
    for (int y = 40; y < 42; ++y) {
      for (int x = 10; x < 90; ++x) g(x, y) -= 0.4F;
    }
    PipelineConfig cfg;
    cfg.binarization = Binarization::kAdaptive;
    cfg.adaptive_window = 0.1;
    const auto b = binarize(PageImage{"d", 0, g, 100}, cfg);
    CHECK(b.pixels(50, 40) == 1);
    CHECK(b.pixels(50, 20) == 0);
    CHECK(b.pixels(95, 80) == 0);
  }
}

TEST_CASE("connected components") {
  CHECK(connected_components(mask_of(5, 5, {})).empty());
  CHECK(connected_components(mask_of(5, 5, {{1, 1}, {2, 2}})).size() == 1);
  CHECK(connected_components(mask_of(5, 5, {{3, 1}, {2, 2}})).size() == 1);

  BinaryImage b{MaskGrid(20, 20, 0), "d", 0};
  for (int y = 5; y < 8; ++y) {
    for (int x = 2; x < 5; ++x) b.pixels(x, y) = 1;
    for (int x = 10; x < 13; ++x) b.pixels(x, y) = 1;
  }
  const auto regions = connected_components(b);
  REQUIRE(regions.size() == 2);
  CHECK(regions[0].area() == 9);
  CHECK(regions[1].area() == 9);
  CHECK(regions[0].bbox == BBox{2, 5, 4, 7});

  SUBCASE("matches flood fill on random masks") {
    std::mt19937 rng(21);
    for (int trial = 0; trial < 60; ++trial) {
      const int w = 1 + static_cast<int>(rng() % 40);
      const int h = 1 + static_cast<int>(rng() % 40);
      const double p = 0.2 + 0.4 * (trial % 5) / 4.0;
      BinaryImage m{MaskGrid(w, h, 0), "d", 0};
      std::size_t ink = 0;
      for (auto& v : m.pixels.cells()) {
        v = std::bernoulli_distribution(p)(rng) ? 1 : 0;
        ink += v;
      }
      std::set<std::vector<std::pair<int, int>>> got;
      std::size_t total = 0;
      for (const auto& r : connected_components(m)) {
        std::vector<std::pair<int, int>> px;
        for (const auto& q : r.pixels) px.emplace_back(q.y, q.x);
        CHECK(std::is_sorted(px.begin(), px.end()));
        total += px.size();
        got.insert(px);
      }
      CHECK(total == ink);
      CHECK(got == oracle::flood_fill(m.pixels));
    }
  }
}

TEST_CASE("remove_edges") {
  const PipelineConfig cfg;
  std::vector<Region> regions{block(0, 300, 500, 2), block(200, 200, 50, 40), block(0, 100, 10, 10),
                              block(480, 450, 20, 30)};
  const auto kept = remove_edges(regions, 500, 500, cfg);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].bbox == BBox{200, 200, 249, 239});
  // A long thin rule away from the border goes too.
  CHECK(remove_edges({block(50, 250, 300, 2)}, 500, 500, cfg).empty());
}

TEST_CASE("merge_regions") {
  const auto single = merge_regions({block(10, 10, 3, 3)}, 0.015, 1000);
  REQUIRE(single.size() == 1);
  CHECK(single[0].bbox == BBox{10, 10, 12, 12});

  const auto touching = merge_regions({block(10, 10, 3, 3), block(13, 10, 3, 3)}, 0.015, 1000);
  REQUIRE(touching.size() == 1);
  CHECK(touching[0].bbox == BBox{10, 10, 15, 12});
  CHECK(touching[0].area() == 18);

  // Limit 15 px on a 1000 px page; chains merge transitively.
  const auto chain = [](int gap) {
    return std::vector<Region>{block(100, 100, 10, 10), block(110 + gap, 100, 10, 10), block(120 + 2 * gap, 100, 10, 10)};
  };
  CHECK(merge_regions(chain(15), 0.015, 1000).size() == 1);
  CHECK(merge_regions(chain(16), 0.015, 1000).size() == 3);

  SUBCASE("order independent and closed under the limit") {
    std::mt19937 rng(5);
    std::vector<Region> rs;
    for (int i = 0; i < 25; ++i) {
      rs.push_back(block(static_cast<int>(rng() % 400), static_cast<int>(rng() % 400), 2 + static_cast<int>(rng() % 8),
                         2 + static_cast<int>(rng() % 8)));
    }
    const auto a = merge_regions(rs, 0.02, 1000);
    std::shuffle(rs.begin(), rs.end(), rng);
    const auto b = merge_regions(rs, 0.02, 1000);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].bbox == b[i].bbox);
      CHECK(a[i].pixels == b[i].pixels);
      for (std::size_t j = i + 1; j < a.size(); ++j) CHECK(a[i].bbox.gap(a[j].bbox) > 20);
    }
  }
  CHECK_THROWS_AS(merge_regions({}, 0.0, 100), InvalidInput);
}

TEST_CASE("heuristic_filter") {
  const PageImage page{"d", 0, GrayGrid(1000, 1000, 1.0F), 100};
  const PipelineConfig cfg;

  CHECK(heuristic_filter({block(100, 100, 60, 40)}, page, cfg).empty());  // density 1
  CHECK(heuristic_filter({block(100, 100, 300, 1)}, page, cfg).empty());  // aspect 300

  // A 300x100 box (3% of the page is too big at 0.08? no: 30000/1e6 = 0.03) with density 0.12.
  Region scrawl;
  scrawl.bbox = BBox{200, 400, 411, 470};  // 212 x 71, aspect ~3.0, area 1.5%
  const long long want = std::llround(0.12 * static_cast<double>(scrawl.bbox.area()));
  for (int y = scrawl.bbox.y_min; y <= scrawl.bbox.y_max && static_cast<long long>(scrawl.pixels.size()) < want; ++y) {
    for (int x = scrawl.bbox.x_min; x <= scrawl.bbox.x_max && static_cast<long long>(scrawl.pixels.size()) < want; x += 2) {
      if ((y - scrawl.bbox.y_min) % 4 == 0 || x == scrawl.bbox.x_min) scrawl.pixels.push_back({x, y});
    }
  }
  scrawl.pixels.push_back({scrawl.bbox.x_max, scrawl.bbox.y_max});
  CHECK(scrawl.density() == doctest::Approx(0.12).epsilon(0.05));
  const auto out = heuristic_filter({scrawl}, page, cfg);
  REQUIRE(out.size() == 1);
  CHECK(out[0].bbox == scrawl.bbox);
  CHECK(out[0].crop.provenance == Provenance{"d", 0, scrawl.bbox});
  CHECK(out[0].crop.pixels.width() == kCanvasSize);
}

TEST_CASE("extract_candidates finds a planted signature and is deterministic") {
  const auto authors = std::vector<synth::AuthorStyle>{synth::make_author(1), synth::make_author(2)};
  const auto doc = synth::make_document("doc.png", authors, {0, 1}, 77, synth::DocumentOptions{});
  const PageImage page{"doc.png", 0, doc.pages[0], 100};
  const auto a = extract_candidates(page);
  const auto b = extract_candidates(page);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].bbox == b[i].bbox);
    CHECK(a[i].crop.pixels == b[i].crop.pixels);
  }
  for (const auto& s : doc.signatures[0]) {
    double best = 0;
    for (const auto& c : a) best = std::max(best, c.bbox.iou(s.bbox));
    CHECK(best >= 0.5);
  }
}
