#include "signet/cluster/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "signet/core/errors.hpp"

namespace signet::cluster {

namespace {

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

double norm_of(std::span<const float> a) {
  const double n = std::sqrt(dot(a, a));
  if (n == 0.0) throw DegenerateEmbedding("zero vector has no direction");
  return n;
}

double distance_with_norms(std::span<const float> a, std::span<const float> b, double na, double nb) {
  const double c = std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
  return 1.0 - c;
}

std::vector<std::span<const float>> spans_of(std::span<const Embedding> es) {
  std::vector<std::span<const float>> out;
  out.reserve(es.size());
  for (const auto& e : es) out.emplace_back(e.values());
  return out;
}

}  // namespace

double cosine_distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw InvalidInput("vectors differ in dimension");
  return distance_with_norms(a, b, norm_of(a), norm_of(b));
}

double cosine_distance(const Embedding& a, const Embedding& b) { return cosine_distance(a.values(), b.values()); }

std::vector<double> distance_matrix(std::span<const std::span<const float>> points) {
  const std::size_t n = points.size();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (points[i].size() != points[0].size()) throw InvalidInput("vectors differ in dimension");
    norms[i] = norm_of(points[i]);
  }
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d[i * n + j] = distance_with_norms(points[i], points[j], norms[i], norms[j]);
      d[j * n + i] = d[i * n + j];
    }
  }
  return d;
}

Dendrogram complete_linkage(std::span<const double> dist, int n) {
  if (n <= 0) throw InvalidInput("nothing to cluster");
  const auto un = static_cast<std::size_t>(n);
  if (dist.size() != un * un) throw InvalidInput("distance matrix size mismatch");
  // Slot i holds the cluster whose leader (smallest leaf) is i.
  std::vector<double> d(dist.begin(), dist.end());
  std::vector<bool> active(un, true);
  std::vector<int> node(un);
  std::vector<int> size(un, 1);
  for (int i = 0; i < n; ++i) node[static_cast<std::size_t>(i)] = i;

  Dendrogram tree;
  tree.leaves = n;
  for (int step = 0; step + 1 < n; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0;
    std::size_t bj = 0;
    for (std::size_t i = 0; i < un; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < un; ++j) {
        if (active[j] && d[i * un + j] < best) {
          best = d[i * un + j];
          bi = i;
          bj = j;
        }
      }
    }
    Merge m;
    m.a = std::min(node[bi], node[bj]);
    m.b = std::max(node[bi], node[bj]);
    m.height = best;
    m.size = size[bi] + size[bj];
    tree.merges.push_back(m);
    for (std::size_t k = 0; k < un; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      const double v = std::max(d[bi * un + k], d[bj * un + k]);
      d[bi * un + k] = v;
      d[k * un + bi] = v;
    }
    active[bj] = false;
    node[bi] = n + step;
    size[bi] = m.size;
  }
  return tree;
}

std::vector<int> cut(const Dendrogram& tree, double t) {
  const int n = tree.leaves;
  // Union-find over node ids; merges are a height-sorted prefix.
  std::vector<int> parent(static_cast<std::size_t>(2 * n), -1);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] >= 0) x = parent[static_cast<std::size_t>(x)];
    return x;
  };
  for (std::size_t i = 0; i < tree.merges.size(); ++i) {
    const Merge& m = tree.merges[i];
    if (m.height > t) break;
    const int id = n + static_cast<int>(i);
    parent[static_cast<std::size_t>(find(m.a))] = id;
    parent[static_cast<std::size_t>(find(m.b))] = id;
  }
  std::vector<int> roots(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) roots[static_cast<std::size_t>(i)] = find(i);
  return canonical_labels(roots);
}

std::vector<int> cluster_points(std::span<const std::span<const float>> points, double t) {
  if (points.empty()) throw InvalidInput("nothing to cluster");
  if (!(t >= 0.0 && t <= 2.0)) throw InvalidInput("threshold t outside [0,2]");
  const int n = static_cast<int>(points.size());
  return cut(complete_linkage(distance_matrix(points), n), t);
}

std::pair<ClusterAssignment, Dendrogram> cluster(std::span<const Embedding> embeddings, double t) {
  if (embeddings.empty()) throw InvalidInput("nothing to cluster");
  if (!(t >= 0.0 && t <= 2.0)) throw InvalidInput("threshold t outside [0,2]");
  const auto pts = spans_of(embeddings);
  const int n = static_cast<int>(pts.size());
  Dendrogram tree = complete_linkage(distance_matrix(pts), n);
  ClusterAssignment a;
  a.threshold_t = t;
  a.labels = cut(tree, t);
  for (const auto& e : embeddings) a.ids.push_back(e.signature_id());
  return {std::move(a), std::move(tree)};
}

double max_intra_distance(std::span<const double> dist, int n, std::span<const int> labels) {
  const auto un = static_cast<std::size_t>(n);
  double worst = 0.0;
  for (std::size_t i = 0; i < un; ++i) {
    for (std::size_t j = i + 1; j < un; ++j) {
      if (labels[i] == labels[j]) worst = std::max(worst, dist[i * un + j]);
    }
  }
  return worst;
}

double pair_f1(std::span<const double> distances, std::span<const int> labels, double t) {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    const bool pred = distances[i] <= t;
    const bool truth = labels[i] == 1;
    tp += (pred && truth) ? 1 : 0;
    fp += (pred && !truth) ? 1 : 0;
    fn += (!pred && truth) ? 1 : 0;
  }
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

double select_threshold(std::span<const double> distances, std::span<const int> labels) {
  if (distances.empty()) throw DataError("no labeled pairs for threshold selection");
  if (distances.size() != labels.size()) throw InvalidInput("distances and labels differ in length");
  double best_t = 0.0;
  double best_f1 = -1.0;
  for (int k = 0; k <= 200; ++k) {
    const double t = k / 100.0;
    const double f1 = pair_f1(distances, labels, t);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_t = t;
    }
  }
  return best_t;
}

double select_threshold(std::span<const Embedding> embeddings, std::span<const LabeledPair> pairs) {
  if (pairs.empty()) throw DataError("no labeled pairs for threshold selection");
  std::vector<double> d;
  std::vector<int> l;
  for (const auto& p : pairs) {
    if (p.first >= embeddings.size() || p.second >= embeddings.size()) throw InvalidInput("pair index out of range");
    d.push_back(cosine_distance(embeddings[p.first], embeddings[p.second]));
    l.push_back(p.label);
  }
  return select_threshold(d, l);
}

}  // namespace signet::cluster
