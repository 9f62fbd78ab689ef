#include "signet/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace signet {

void BBox::include(int x, int y) noexcept {
  x_min = std::min(x_min, x);
  y_min = std::min(y_min, y);
  x_max = std::max(x_max, x);
  y_max = std::max(y_max, y);
}

BBox empty_bbox() noexcept {
  constexpr int kMax = std::numeric_limits<int>::max();
  constexpr int kMin = std::numeric_limits<int>::min();
  return BBox{kMax, kMax, kMin, kMin};
}

BBox BBox::envelope(const BBox& other) const noexcept {
  return BBox{std::min(x_min, other.x_min), std::min(y_min, other.y_min),
              std::max(x_max, other.x_max), std::max(y_max, other.y_max)};
}

int BBox::gap(const BBox& other) const noexcept {
  // Pixel columns strictly between the boxes; adjacent boxes have gap 0.
  const int dx = std::max({0, other.x_min - x_max - 1, x_min - other.x_max - 1});
  const int dy = std::max({0, other.y_min - y_max - 1, y_min - other.y_max - 1});
  return std::max(dx, dy);
}

long long BBox::intersection_area(const BBox& other) const noexcept {
  const long long w = std::min(x_max, other.x_max) - std::max(x_min, other.x_min) + 1;
  const long long h = std::min(y_max, other.y_max) - std::max(y_min, other.y_min) + 1;
  return (w > 0 && h > 0) ? w * h : 0;
}

double BBox::iou(const BBox& other) const noexcept {
  const long long inter = intersection_area(other);
  const long long uni = area() + other.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

namespace {

void check_unit_range(const GrayGrid& g, const char* what) {
  for (float v : g.cells()) {
    if (!(v >= 0.0F && v <= 1.0F)) {
      throw InvalidInput(std::string(what) + ": intensity outside [0,1]");
    }
  }
}

}  // namespace

void PageImage::validate() const {
  if (pixels.empty()) throw InvalidInput("page '" + doc_id + "' has no pixels");
  if (dpi <= 0) throw InvalidInput("page '" + doc_id + "' has non-positive dpi");
  if (page_index < 0) throw InvalidInput("negative page index");
  check_unit_range(pixels, "page");
}

void SignatureImage::validate() const {
  if (pixels.width() != kCanvasSize || pixels.height() != kCanvasSize) {
    throw InvalidInput("signature image must be 256x256, got " +
                       std::to_string(pixels.width()) + "x" +
                       std::to_string(pixels.height()));
  }
  check_unit_range(pixels, "signature image");
}

Embedding::Embedding(Vector values, std::string signature_id)
    : values_(std::move(values)), signature_id_(std::move(signature_id)) {
  if (values_.size() != static_cast<std::size_t>(kEmbeddingDim)) {
    throw InvalidInput("embedding must have 4096 components, got " +
                       std::to_string(values_.size()));
  }
  bool nonzero = false;
  for (float v : values_) {
    if (!std::isfinite(v)) throw InvalidInput("embedding has a non-finite component");
    nonzero = nonzero || v != 0.0F;
  }
  if (!nonzero) throw DegenerateEmbedding("embedding is the zero vector");
}

int ClusterAssignment::cluster_count() const noexcept {
  int top = -1;
  for (int l : labels) top = std::max(top, l);
  return top + 1;
}

void ClusterAssignment::validate() const {
  if (ids.size() != labels.size()) throw InvalidInput("ids and labels differ in length");
  std::set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw InvalidInput("duplicate signature id '" + id + "'");
  }
  std::vector<bool> used(labels.size(), false);
  for (int l : labels) {
    if (l < 0 || l >= static_cast<int>(labels.size())) {
      throw InvalidInput("cluster label out of range");
    }
    used[static_cast<std::size_t>(l)] = true;
  }
  const int k = cluster_count();
  for (int l = 0; l < k; ++l) {
    if (!used[static_cast<std::size_t>(l)]) throw InvalidInput("cluster labels not contiguous");
  }
}

std::vector<int> canonical_labels(std::span<const int> labels) {
  std::vector<int> out;
  out.reserve(labels.size());
  std::vector<std::pair<int, int>> mapping;  // (raw, canonical)
  for (int raw : labels) {
    auto it = std::find_if(mapping.begin(), mapping.end(),
                           [raw](const auto& m) { return m.first == raw; });
    if (it == mapping.end()) {
      mapping.emplace_back(raw, static_cast<int>(mapping.size()));
      out.push_back(mapping.back().second);
    } else {
      out.push_back(it->second);
    }
  }
  return out;
}

std::string format_signature_id(const Provenance& p) {
  return p.doc_id + "#p" + std::to_string(p.page_index) + "#" + std::to_string(p.bbox.x_min) +
         "_" + std::to_string(p.bbox.y_min) + "_" + std::to_string(p.bbox.x_max) + "_" +
         std::to_string(p.bbox.y_max);
}

}  // namespace signet
