#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "signet/core/types.hpp"

namespace signet::cluster {

/// 1 - cos(a, b) in [0, 2]; DegenerateEmbedding for a zero vector.
double cosine_distance(std::span<const float> a, std::span<const float> b);
double cosine_distance(const Embedding& a, const Embedding& b);

/// Row-major n x n matrix of cosine_distance values (bitwise equal to calling
/// it pair by pair).
std::vector<double> distance_matrix(std::span<const std::span<const float>> points);

/// Node ids follow the usual convention: leaves are 0..n-1 and merge i
/// creates node n+i.
struct Merge {
  int a = 0;  // smaller node id
  int b = 0;
  double height = 0.0;
  int size = 0;
};

struct Dendrogram {
  int leaves = 0;
  std::vector<Merge> merges;  // heights non-decreasing
};

/// Full complete-linkage dendrogram of a distance matrix. Among equal
/// distances the pair of lowest (first, second) leader index merges first,
/// a cluster's leader being its smallest leaf index.
Dendrogram complete_linkage(std::span<const double> dist, int n);

/// Labels from applying every merge with height <= t, numbered by first
/// member appearance.
std::vector<int> cut(const Dendrogram& tree, double t);

/// Complete linkage on generic vectors, cut at t.
std::vector<int> cluster_points(std::span<const std::span<const float>> points, double t);

/// Clusters embeddings (ids taken from signature_id) and returns the cut
/// assignment with the full dendrogram.
std::pair<ClusterAssignment, Dendrogram> cluster(std::span<const Embedding> embeddings, double t);

/// Largest intra-cluster distance over all clusters (0 for singletons only).
double max_intra_distance(std::span<const double> dist, int n, std::span<const int> labels);

struct LabeledPair {
  std::size_t first = 0;
  std::size_t second = 0;
  int label = 0;  // 1 = same author
};

/// Pairwise F1 of "distance <= t" as the same-author prediction.
double pair_f1(std::span<const double> distances, std::span<const int> labels, double t);

/// Grid k/100 on [0, 2]; the highest F1 wins and the smallest t breaks ties.
double select_threshold(std::span<const double> distances, std::span<const int> labels);
double select_threshold(std::span<const Embedding> embeddings, std::span<const LabeledPair> pairs);

}  // namespace signet::cluster
