#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "signet/core/errors.hpp"

namespace signet {

inline constexpr int kCanvasSize = 256;
inline constexpr int kEmbeddingDim = 4096;

/// Row-major 2-D grid. Intensity grids use 0 = black ink, 1 = white paper.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        cells_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {
    if (width < 0 || height < 0) throw InvalidInput("negative grid dimensions");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return cells_.empty(); }
  std::size_t size() const noexcept { return cells_.size(); }

  T& operator()(int x, int y) { return cells_[index(x, y)]; }
  const T& operator()(int x, int y) const { return cells_[index(x, y)]; }
  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::span<T> cells() noexcept { return cells_; }
  std::span<const T> cells() const noexcept { return cells_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> cells_;
};

using GrayGrid = Grid<float>;
using MaskGrid = Grid<std::uint8_t>;

/// Inclusive pixel bounding box: the min/max x and y of the pixels it covers.
struct BBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = -1;
  int y_max = -1;

  int width() const noexcept { return x_max - x_min + 1; }
  int height() const noexcept { return y_max - y_min + 1; }
  long long area() const noexcept {
    return static_cast<long long>(width()) * static_cast<long long>(height());
  }
  bool valid() const noexcept { return x_min <= x_max && y_min <= y_max; }
  void include(int x, int y) noexcept;
  BBox envelope(const BBox& other) const noexcept;
  /// Chebyshev gap between two boxes: 0 when they touch or overlap.
  int gap(const BBox& other) const noexcept;
  long long intersection_area(const BBox& other) const noexcept;
  double iou(const BBox& other) const noexcept;

  friend bool operator==(const BBox&, const BBox&) = default;
  friend auto operator<=>(const BBox&, const BBox&) = default;
};

BBox empty_bbox() noexcept;

struct PageImage {
  std::string doc_id;
  int page_index = 0;
  GrayGrid pixels;
  int dpi = 200;

  /// Throws InvalidInput when the page breaks its invariants.
  void validate() const;
};

/// Foreground mask of a page. 1 = ink, which is inverted relative to intensity.
struct BinaryImage {
  MaskGrid pixels;
  std::string doc_id;
  int page_index = 0;
};

struct Provenance {
  std::string doc_id;
  int page_index = 0;
  BBox bbox;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

enum class SignatureState { kRaw, kCleaned };

struct SignatureImage {
  GrayGrid pixels{kCanvasSize, kCanvasSize, 1.0F};
  SignatureState state = SignatureState::kRaw;
  Provenance provenance;

  void validate() const;
};

struct CandidateRegion {
  BBox bbox;
  SignatureImage crop;
  double density = 0.0;
  std::string doc_id;
  int page_index = 0;

  double aspect() const noexcept {
    return static_cast<double>(bbox.width()) / static_cast<double>(bbox.height());
  }
};

using Vector = std::vector<float>;

/// Signature embedding: kEmbeddingDim finite components, not all zero.
class Embedding {
 public:
  Embedding() = default;
  explicit Embedding(Vector values, std::string signature_id = {});

  const Vector& values() const noexcept { return values_; }
  const std::string& signature_id() const noexcept { return signature_id_; }

 private:
  Vector values_;
  std::string signature_id_;
};

/// Flat cluster labelling aligned with an id list. Labels are contiguous from 0.
struct ClusterAssignment {
  std::vector<std::string> ids;
  std::vector<int> labels;
  double threshold_t = 0.0;

  std::size_t size() const noexcept { return ids.size(); }
  int cluster_count() const noexcept;
  void validate() const;
};

/// Relabels arbitrary integer labels to 0,1,2,... by first appearance.
std::vector<int> canonical_labels(std::span<const int> labels);

struct PairExample {
  SignatureImage first;
  SignatureImage second;
  int label = 0;
};

std::string format_signature_id(const Provenance& p);

}  // namespace signet
