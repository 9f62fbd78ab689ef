#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "signet/cluster/cluster.hpp"

using namespace signet;
using namespace signet::cluster;

namespace {

std::vector<std::vector<float>> random_points(int n, int dim, std::mt19937_64& rng) {
  std::normal_distribution<float> d(0.0F, 1.0F);
  std::vector<std::vector<float>> pts(static_cast<std::size_t>(n), std::vector<float>(static_cast<std::size_t>(dim)));
  for (auto& p : pts) {
    for (float& v : p) v = d(rng);
  }
  return pts;
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

}  // namespace

TEST_CASE("cosine distance") {
  const std::vector<float> a{1.0F, 0.0F};
  const std::vector<float> b{0.0F, 2.0F};
  const std::vector<float> c{-3.0F, 0.0F};
  CHECK(cosine_distance(a, a) == 0.0);
  CHECK(cosine_distance(a, b) == doctest::Approx(1.0));
  CHECK(cosine_distance(a, c) == 2.0);
  CHECK_THROWS_AS(cosine_distance(a, std::vector<float>{0.0F, 0.0F}), DegenerateEmbedding);

  std::mt19937_64 rng(1);
  const auto pts = random_points(6, 10, rng);
  const auto sp = spans(pts);
  const auto d = distance_matrix(sp);
  for (int i = 0; i < 6; ++i) {
    CHECK(d[static_cast<std::size_t>(i * 7)] == 0.0);
    for (int j = 0; j < 6; ++j) {
      if (i == j) continue;  // the matrix pins its diagonal to exactly zero
      CHECK(d[static_cast<std::size_t>(i * 6 + j)] == cosine_distance(sp[static_cast<std::size_t>(i)], sp[static_cast<std::size_t>(j)]));
    }
  }
}

TEST_CASE("planar angles example") {
  const std::vector<double> deg{0, 5, 10, 90, 95, 180};
  std::vector<std::vector<float>> pts;
  for (double a : deg) {
    const double r = a * std::numbers::pi / 180.0;
    pts.push_back({static_cast<float>(std::cos(r)), static_cast<float>(std::sin(r))});
  }
  const double t = 1.0 - std::cos(15.0 * std::numbers::pi / 180.0);
  const auto labels = cluster_points(spans(pts), t);
  CHECK(labels == std::vector<int>{0, 0, 0, 1, 1, 2});
  const auto d = distance_matrix(spans(pts));
  CHECK(max_intra_distance(d, 6, labels) <= t);
  CHECK(labels == oracle::complete_linkage_partition(square(d, 6), t));
}

TEST_CASE("threshold boundaries") {
  std::mt19937_64 rng(2);
  const auto pts = random_points(7, 5, rng);
  CHECK(cluster_points(spans(pts), 0.0) == std::vector<int>{0, 1, 2, 3, 4, 5, 6});
  CHECK(cluster_points(spans(pts), 2.0) == std::vector<int>(7, 0));
  CHECK_THROWS_AS(cluster_points(spans(pts), 2.5), InvalidInput);
  CHECK_THROWS_AS(cluster_points(spans(pts), -0.1), InvalidInput);
  CHECK_THROWS_AS(cluster_points({}, 0.5), InvalidInput);
  CHECK(cluster_points(spans(std::vector<std::vector<float>>{{1.0F}}), 0.5) == std::vector<int>{0});
}

TEST_CASE("dendrogram shape") {
  std::mt19937_64 rng(3);
  const auto pts = random_points(9, 4, rng);
  const auto d = distance_matrix(spans(pts));
  const auto tree = complete_linkage(d, 9);
  CHECK(tree.leaves == 9);
  REQUIRE(tree.merges.size() == 8);
  std::vector<int> size(17, 1);
  for (std::size_t i = 0; i < tree.merges.size(); ++i) {
    const auto& m = tree.merges[i];
    CHECK(m.a < m.b);
    CHECK(m.b < 9 + static_cast<int>(i));
    CHECK(m.size == size[static_cast<std::size_t>(m.a)] + size[static_cast<std::size_t>(m.b)]);
    size[9 + i] = m.size;
    if (i > 0) CHECK(m.height >= tree.merges[i - 1].height);
  }
  CHECK(tree.merges.back().size == 9);
}

TEST_CASE("complete linkage properties on random sets") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 80; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 12);
    const auto pts = random_points(n, 3 + static_cast<int>(rng() % 5), rng);
    const auto d = distance_matrix(spans(pts));
    const double t = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
    const auto labels = cluster_points(spans(pts), t);
    CHECK(labels == canonical_labels(labels));
    CHECK(max_intra_distance(d, n, labels) <= t);
    CHECK(labels == oracle::complete_linkage_partition(square(d, n), t));

    // Raising t only merges clusters.
    const double t2 = std::min(2.0, t + 0.3);
    const auto coarse = cluster_points(spans(pts), t2);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]) {
          CHECK(coarse[static_cast<std::size_t>(i)] == coarse[static_cast<std::size_t>(j)]);
        }
      }
    }
  }
}

TEST_CASE("ties merge the lowest pair first") {
  // Four points where every cross distance is equal: leaders 0 and 1 go first.
  const std::vector<double> d{0, 1, 1, 1, 1, 0, 1, 1, 1, 1, 0, 1, 1, 1, 1, 0};
  const auto tree = complete_linkage(d, 4);
  CHECK(tree.merges[0].a == 0);
  CHECK(tree.merges[0].b == 1);
  CHECK(cut(tree, 0.5) == std::vector<int>{0, 1, 2, 3});
  CHECK(cut(tree, 1.0) == std::vector<int>{0, 0, 0, 0});
}

TEST_CASE("cluster embeddings keeps ids") {
  Vector a(kEmbeddingDim, 0.0F);
  Vector b(kEmbeddingDim, 0.0F);
  a[0] = 1.0F;
  b[1] = 1.0F;
  Vector a2 = a;
  a2[1] = 0.01F;
  const std::vector<Embedding> e{Embedding(a, "x"), Embedding(b, "y"), Embedding(a2, "z")};
  const auto [assignment, tree] = cluster::cluster(e, 0.1);
  CHECK(assignment.ids == std::vector<std::string>{"x", "y", "z"});
  CHECK(assignment.labels == std::vector<int>{0, 1, 0});
  CHECK(assignment.threshold_t == 0.1);
  CHECK(tree.merges.size() == 2);
}

TEST_CASE("threshold selection") {
  SUBCASE("separable case returns the smallest perfect t") {
    const std::vector<double> dist{0.05, 0.1, 0.08, 0.9, 1.2, 0.95};
    const std::vector<int> lab{1, 1, 1, 0, 0, 0};
    CHECK(select_threshold(dist, lab) == doctest::Approx(0.10));
    CHECK(pair_f1(dist, lab, 0.5) == 1.0);
  }
  SUBCASE("all positive") {
    const std::vector<double> dist{0.3, 1.7, 0.9};
    const std::vector<int> lab{1, 1, 1};
    CHECK(select_threshold(dist, lab) == doctest::Approx(1.70));
    CHECK(pair_f1(dist, lab, 2.0) == 1.0);
  }
  SUBCASE("overlap matches grid search") {
    std::mt19937_64 rng(6);
    std::vector<double> dist;
    std::vector<int> lab;
    for (int i = 0; i < 200; ++i) {
      const int y = i % 3 == 0 ? 1 : 0;
      dist.push_back(std::clamp(std::normal_distribution<double>(y ? 0.5 : 0.9, 0.2)(rng), 0.0, 2.0));
      lab.push_back(y);
    }
    double best_f1 = -1;
    double best_t = 0;
    for (int k = 0; k <= 200; ++k) {
      const double t = k / 100.0;
      const double f = pair_f1(dist, lab, t);
      if (f > best_f1) {
        best_f1 = f;
        best_t = t;
      }
    }
    CHECK(select_threshold(dist, lab) == best_t);
  }
  CHECK_THROWS_AS(select_threshold(std::vector<double>{}, std::vector<int>{}), DataError);
  CHECK(pair_f1(std::vector<double>{0.5}, std::vector<int>{1}, 0.1) == 0.0);
}
