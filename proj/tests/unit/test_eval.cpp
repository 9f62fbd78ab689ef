#include <doctest.h>

#include <fstream>
#include <random>

#include "oracles.hpp"
#include "signet/eval/eval.hpp"
#include "test_util.hpp"

using namespace signet;
using namespace signet::eval;

namespace {

ClusterAssignment assignment(std::vector<std::string> ids, std::vector<int> labels) {
  return ClusterAssignment{std::move(ids), std::move(labels), 0.5};
}

}  // namespace

TEST_CASE("pair confusion examples") {
  const std::vector<int> ab_c{0, 0, 1};
  const std::vector<int> a_bc{0, 1, 1};
  CHECK(pair_confusion(ab_c, ab_c) == PairConfusion{1, 2, 0, 0});
  CHECK(pair_confusion(ab_c, a_bc) == PairConfusion{0, 1, 1, 1});
  const std::vector<int> singles{0, 1, 2, 3, 4};
  CHECK(pair_confusion(singles, singles) == PairConfusion{0, 10, 0, 0});
}

TEST_CASE("rand index") {
  const std::vector<int> ab_c{0, 0, 1};
  const std::vector<int> a_bc{0, 1, 1};
  CHECK(rand_index(ab_c, ab_c) == 1.0);
  CHECK(rand_index(ab_c, a_bc) == doctest::Approx(1.0 / 3.0));
  CHECK(rand_index(std::vector<int>{0, 0, 0, 0}, std::vector<int>{0, 1, 2, 3}) == 0.0);
  CHECK_THROWS_AS(rand_index(std::vector<int>{0}, std::vector<int>{0}), InvalidInput);
  CHECK_THROWS_AS(rand_index(std::vector<int>{0, 1}, std::vector<int>{0, 1, 2}), InvalidInput);
}

TEST_CASE("adjusted rand index") {
  const std::vector<int> p{0, 0, 1, 1, 2};
  CHECK(adjusted_rand_index(p, p) == 1.0);
  CHECK(adjusted_rand_index(std::vector<int>{0, 1, 2}, std::vector<int>{0, 1, 2}) == 1.0);
  CHECK(adjusted_rand_index(std::vector<int>{0, 0, 0}, std::vector<int>{0, 0, 0}) == 1.0);
  CHECK(adjusted_rand_index(std::vector<int>{0, 0, 0}, std::vector<int>{0, 1, 2}) == 0.0);
  // Label values do not matter, only the partition.
  CHECK(adjusted_rand_index(std::vector<int>{5, 5, 9, 9, 1}, p) == 1.0);

  SUBCASE("agrees with the contingency formula on every pair of partitions of 5") {
    const auto parts = oracle::set_partitions(5);
    CHECK(parts.size() == 52);
    for (const auto& a : parts) {
      for (const auto& b : parts) {
        CHECK(rand_index(a, b) == oracle::rand_index(a, b));
        CHECK(adjusted_rand_index(a, b) == doctest::Approx(oracle::adjusted_rand_index(a, b)).epsilon(1e-12));
      }
    }
  }
  SUBCASE("chance level for independent partitions") {
    std::mt19937_64 rng(12);
    double sum = 0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<int> a(100);
      std::vector<int> b(100);
      for (int i = 0; i < 100; ++i) {
        a[static_cast<std::size_t>(i)] = static_cast<int>(rng() % 5);
        b[static_cast<std::size_t>(i)] = static_cast<int>(rng() % 5);
      }
      sum += adjusted_rand_index(a, b);
    }
    CHECK(std::abs(sum / 100) < 0.05);
  }
}

TEST_CASE("assignments are aligned by id") {
  const auto pred = assignment({"a", "b", "c"}, {0, 0, 1});
  const auto truth = assignment({"c", "a", "b"}, {0, 1, 1});
  CHECK(rand_index(pred, truth) == 1.0);
  CHECK(adjusted_rand_index(pred, truth) == 1.0);
  CHECK_THROWS_AS(pair_confusion(pred, assignment({"a", "b", "d"}, {0, 0, 1})), InvalidInput);
}

TEST_CASE("roc curve") {
  const auto perfect = roc_curve(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1});
  CHECK(perfect.auc == 1.0);
  CHECK(perfect.points.front().fpr == 0.0);
  CHECK(perfect.points.front().tpr == 0.0);
  CHECK(perfect.points.back().fpr == 1.0);
  CHECK(perfect.points.back().tpr == 1.0);

  CHECK(roc_curve(std::vector<double>{0.4, 0.4, 0.4, 0.4}, std::vector<int>{0, 1, 0, 1}).auc == 0.5);

  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  const std::vector<int> l{0, 0, 1, 1};
  const auto c = roc_curve(s, l);
  CHECK(c.auc == doctest::Approx(0.75));
  CHECK(c.auc == doctest::Approx(oracle::outrank_probability(s, l)));
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    CHECK(c.points[i].fpr >= c.points[i - 1].fpr);
    CHECK(c.points[i].tpr >= c.points[i - 1].tpr);
  }

  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> sc;
    std::vector<int> lb;
    for (int i = 0; i < 40; ++i) {
      sc.push_back(static_cast<double>(rng() % 10) / 10.0);  // plenty of ties
      lb.push_back(i % 3 == 0 ? 1 : 0);
    }
    CHECK(std::abs(roc_curve(sc, lb).auc - oracle::outrank_probability(sc, lb)) <= 1e-9);
  }

  CHECK_THROWS_AS(roc_curve(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), InvalidInput);
  CHECK_THROWS_AS(roc_curve(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 2}), InvalidInput);
}

TEST_CASE("extraction precision") {
  const std::vector<Region> truth{{"d", 0, BBox{0, 0, 9, 9}}, {"d", 1, BBox{20, 20, 29, 29}}};
  CHECK(extraction_precision(truth, truth) == 1.0);
  const std::vector<Region> half{{"d", 0, BBox{0, 0, 9, 9}}, {"d", 0, BBox{50, 50, 59, 59}}};
  CHECK(extraction_precision(half, truth) == 0.5);
  // Right box, wrong page.
  const std::vector<Region> wrong_page{{"d", 1, BBox{0, 0, 9, 9}}};
  CHECK(extraction_precision(wrong_page, truth) == 0.0);
  CHECK(extraction_precision({}, truth) == 0.0);
  CHECK(iou(BBox{0, 0, 9, 9}, BBox{0, 0, 9, 4}) == doctest::Approx(0.5));
}

TEST_CASE("telemetry and report") {
  TempDir dir("telemetry");
  RunTelemetry t;
  t.rows = {{"ingest", "doc.pdf", 2000, 0},        {"clean", "s1", 1000, 20000}, {"clean", "s2", 1000, 30000},
            {"embed", "s1", 500, 4122},            {"embed", "s2", 500, 4122},   {"cluster", "all", 100000, 0}};
  write_telemetry(t, dir / "t.tsv");
  const auto back = read_telemetry(dir / "t.tsv");
  REQUIRE(back.rows.size() == t.rows.size());
  CHECK(back.rows[1].bytes == 20000);

  const auto r = scalability_report(back);
  CHECK(r.signatures == 2);
  CHECK(*r.cluster_seconds_per_signature == doctest::Approx(0.05));
  CHECK(*r.mean_image_bytes == 25000.0);
  CHECK(*r.mean_embedding_bytes == 4122.0);
  CHECK(*r.reduction == doctest::Approx(1.0 - 4122.0 / 25000.0));
  CHECK(*r.reduction_vs_reference_image == doctest::Approx(1.0 - 4122.0 / kReferenceImageBytes));
  CHECK(to_json(r)["signatures"] == 2);
  CHECK(to_text(r).find("0.1") != std::string::npos);

  const auto empty = scalability_report(RunTelemetry{});
  CHECK(empty.signatures == 0);
  CHECK_FALSE(empty.cluster_seconds_per_signature);
  CHECK_FALSE(empty.reduction);
  CHECK_NOTHROW(to_text(empty));
}

TEST_CASE("assignment tsv") {
  TempDir dir("tsv");
  const auto a = assignment({"x#p0#1_2_3_4", "y", "z"}, {0, 1, 0});
  write_assignment_tsv(a, dir / "a.tsv");
  const auto back = read_assignment_tsv(dir / "a.tsv");
  CHECK(back.ids == a.ids);
  CHECK(back.labels == a.labels);

  {
    std::ofstream out(dir / "truth.tsv");
    out << "# id\tauthor\nm\tbob\nn\tann\no\tbob\n";
  }
  const auto truth = read_assignment_tsv(dir / "truth.tsv");
  CHECK(truth.labels == std::vector<int>{0, 1, 0});
  {
    std::ofstream out(dir / "bad.tsv");
    out << "just-one-field\n";
  }
  CHECK_THROWS_AS(read_assignment_tsv(dir / "bad.tsv"), FormatError);
}
