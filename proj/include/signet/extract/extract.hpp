#pragma once

#include <vector>

#include "signet/core/config.hpp"
#include "signet/core/types.hpp"

namespace signet::extract {

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point& a, const Point& b) {
    return a.y != b.y ? a.y <=> b.y : a.x <=> b.x;
  }
};

/// Foreground pixel set with its tight bounding box. Pixels are kept in
/// raster order (y, then x).
struct Region {
  std::vector<Point> pixels;
  BBox bbox = empty_bbox();

  std::size_t area() const noexcept { return pixels.size(); }
  double density() const noexcept {
    return static_cast<double>(pixels.size()) / static_cast<double>(bbox.area());
  }
};

/// Otsu threshold over the 256-level histogram of the page. Returns the
/// highest intensity level (0..255) that is classed as ink, or -1 when the
/// page is constant.
int otsu_level(const GrayGrid& pixels);

/// Foreground = ink (dark) under the configured binarization.
BinaryImage binarize(const PageImage& page, const PipelineConfig& cfg = {});

/// Maximal 8-connected foreground regions, sorted by (y_min, x_min).
std::vector<Region> connected_components(const BinaryImage& binary);

/// Drops regions within the border margin and long thin rule lines.
std::vector<Region> remove_edges(std::vector<Region> regions, int page_width, int page_height,
                                 const PipelineConfig& cfg = {});

/// Merges regions whose bounding boxes lie within merge_dist * page_width of
/// each other (Chebyshev gap), transitively, until no two outputs are that
/// close. The result does not depend on input order.
std::vector<Region> merge_regions(std::vector<Region> regions, double merge_dist,
                                  int page_width);

/// Keeps regions whose density, aspect ratio and relative bbox area are inside
/// the configured bounds, crops them from the grayscale page and normalizes
/// them to the 256x256 canvas.
std::vector<CandidateRegion> heuristic_filter(const std::vector<Region>& regions,
                                              const PageImage& page,
                                              const PipelineConfig& cfg = {});

/// binarize -> connected_components -> remove_edges -> merge_regions ->
/// heuristic_filter.
std::vector<CandidateRegion> extract_candidates(const PageImage& page,
                                                const PipelineConfig& cfg = {});

}  // namespace signet::extract
