#include "signet/extract/extract.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "signet/core/canvas.hpp"
#include "signet/util/image_io.hpp"

namespace signet::extract {

namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

void sort_regions(std::vector<Region>& regions) {
  std::sort(regions.begin(), regions.end(), [](const Region& a, const Region& b) {
    if (a.bbox.y_min != b.bbox.y_min) return a.bbox.y_min < b.bbox.y_min;
    if (a.bbox.x_min != b.bbox.x_min) return a.bbox.x_min < b.bbox.x_min;
    return a.pixels.front() < b.pixels.front();
  });
}

MaskGrid adaptive_mask(const GrayGrid& px, double window_frac, double offset) {
  const int w = px.width();
  const int h = px.height();
  const int shorter = std::min(w, h);
  const int half = std::max(1, static_cast<int>(std::lround(window_frac * shorter / 2.0)));
  std::vector<double> integral(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
  auto at = [&](int x, int y) -> double& {
    return integral[static_cast<std::size_t>(y) * (w + 1) + x];
  };
  for (int y = 0; y < h; ++y) {
    double row = 0.0;
    for (int x = 0; x < w; ++x) {
      row += px(x, y);
      at(x + 1, y + 1) = at(x + 1, y) + row;
    }
  }
  MaskGrid mask(w, h, 0);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - half);
    const int y1 = std::min(h, y + half + 1);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - half);
      const int x1 = std::min(w, x + half + 1);
      const double sum = at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0);
      const double mean = sum / ((x1 - x0) * (y1 - y0));
      mask(x, y) = px(x, y) < mean - offset ? 1 : 0;
    }
  }
  return mask;
}

}  // namespace

int otsu_level(const GrayGrid& pixels) {
  std::array<double, 256> hist{};
  for (float v : pixels.cells()) hist[io::to_byte(v)] += 1.0;
  const double total = static_cast<double>(pixels.size());
  if (total == 0.0) return -1;

  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[static_cast<std::size_t>(i)];

  // Maximize between-class variance; the first maximum wins ties.
  double weight_lo = 0.0;
  double sum_lo = 0.0;
  double best = 0.0;
  int level = -1;
  for (int k = 0; k < 255; ++k) {
    weight_lo += hist[static_cast<std::size_t>(k)];
    sum_lo += k * hist[static_cast<std::size_t>(k)];
    const double weight_hi = total - weight_lo;
    if (weight_lo == 0.0 || weight_hi == 0.0) continue;
    const double mean_lo = sum_lo / weight_lo;
    const double mean_hi = (sum_all - sum_lo) / weight_hi;
    const double between = weight_lo * weight_hi * (mean_lo - mean_hi) * (mean_lo - mean_hi);
    if (between > best) {
      best = between;
      level = k;
    }
  }
  return level;
}

BinaryImage binarize(const PageImage& page, const PipelineConfig& cfg) {
  page.validate();
  BinaryImage out{MaskGrid(page.pixels.width(), page.pixels.height(), 0), page.doc_id,
                  page.page_index};
  if (cfg.binarization == Binarization::kAdaptive) {
    out.pixels = adaptive_mask(page.pixels, cfg.adaptive_window, cfg.adaptive_offset);
    return out;
  }
  const int level = otsu_level(page.pixels);
  if (level < 0) return out;
  const auto src = page.pixels.cells();
  auto dst = out.pixels.cells();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = io::to_byte(src[i]) <= level ? 1 : 0;
  return out;
}

std::vector<Region> connected_components(const BinaryImage& binary) {
  const MaskGrid& m = binary.pixels;
  const int w = m.width();
  const int h = m.height();
  // Two-pass labelling with union-find over provisional labels.
  std::vector<std::size_t> label(m.size(), 0);
  UnionFind uf(m.size() + 1);
  std::size_t next = 1;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (m(x, y) == 0) continue;
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      std::size_t assigned = 0;
      constexpr std::array<std::array<int, 2>, 4> kPrior{{{-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};
      for (const auto& d : kPrior) {
        const int nx = x + d[0];
        const int ny = y + d[1];
        if (!m.contains(nx, ny) || m(nx, ny) == 0) continue;
        const std::size_t nl = label[static_cast<std::size_t>(ny) * w + nx];
        if (assigned == 0) {
          assigned = nl;
        } else {
          uf.unite(assigned, nl);
        }
      }
      label[idx] = assigned != 0 ? assigned : next++;
    }
  }

  std::vector<std::size_t> slot(next, static_cast<std::size_t>(-1));
  std::vector<Region> regions;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t l = label[static_cast<std::size_t>(y) * w + x];
      if (l == 0) continue;
      const std::size_t root = uf.find(l);
      if (slot[root] == static_cast<std::size_t>(-1)) {
        slot[root] = regions.size();
        regions.emplace_back();
      }
      Region& r = regions[slot[root]];
      r.pixels.push_back({x, y});
      r.bbox.include(x, y);
    }
  }
  sort_regions(regions);
  return regions;
}

std::vector<Region> remove_edges(std::vector<Region> regions, int page_width, int page_height,
                                 const PipelineConfig& cfg) {
  const int shorter = std::min(page_width, page_height);
  const int margin = std::max(1, static_cast<int>(std::ceil(cfg.edge_margin * shorter)));
  const double line_len = cfg.line_min_length * page_width;
  std::erase_if(regions, [&](const Region& r) {
    const BBox& b = r.bbox;
    const bool near_border = b.x_min < margin || b.y_min < margin ||
                             b.x_max > page_width - 1 - margin ||
                             b.y_max > page_height - 1 - margin;
    const double longer = std::max(b.width(), b.height());
    const double thinner = std::min(b.width(), b.height());
    const bool rule_line = longer >= line_len && longer / thinner >= cfg.line_min_aspect;
    return near_border || rule_line;
  });
  return regions;
}

std::vector<Region> merge_regions(std::vector<Region> regions, double merge_dist,
                                  int page_width) {
  if (!(merge_dist > 0.0)) throw InvalidInput("merge_dist must be positive");
  const double limit = merge_dist * page_width;
  bool changed = true;
  while (changed && regions.size() > 1) {
    changed = false;
    UnionFind uf(regions.size());
    for (std::size_t i = 0; i < regions.size(); ++i) {
      for (std::size_t j = i + 1; j < regions.size(); ++j) {
        if (regions[i].bbox.gap(regions[j].bbox) <= limit) changed |= uf.unite(i, j);
      }
    }
    if (!changed) break;
    std::vector<Region> merged;
    std::vector<std::size_t> slot(regions.size(), static_cast<std::size_t>(-1));
    for (std::size_t i = 0; i < regions.size(); ++i) {
      const std::size_t root = uf.find(i);
      if (slot[root] == static_cast<std::size_t>(-1)) {
        slot[root] = merged.size();
        merged.push_back(Region{{}, regions[i].bbox});
      }
      Region& dst = merged[slot[root]];
      dst.bbox = dst.bbox.envelope(regions[i].bbox);
      dst.pixels.insert(dst.pixels.end(), regions[i].pixels.begin(), regions[i].pixels.end());
    }
    for (auto& r : merged) std::sort(r.pixels.begin(), r.pixels.end());
    regions = std::move(merged);
  }
  sort_regions(regions);
  return regions;
}

std::vector<CandidateRegion> heuristic_filter(const std::vector<Region>& regions,
                                              const PageImage& page,
                                              const PipelineConfig& cfg) {
  const double page_area =
      static_cast<double>(page.pixels.width()) * static_cast<double>(page.pixels.height());
  std::vector<CandidateRegion> out;
  for (const Region& r : regions) {
    if (r.pixels.empty()) continue;
    const double density = r.density();
    const double aspect = static_cast<double>(r.bbox.width()) / r.bbox.height();
    const double area = static_cast<double>(r.bbox.area()) / page_area;
    if (!cfg.density.contains(density) || !cfg.aspect.contains(aspect) ||
        !cfg.area.contains(area)) {
      continue;
    }
    CandidateRegion c;
    c.bbox = r.bbox;
    c.density = density;
    c.doc_id = page.doc_id;
    c.page_index = page.page_index;
    c.crop = normalize_to_canvas(crop_grid(page.pixels, r.bbox),
                                 Provenance{page.doc_id, page.page_index, r.bbox});
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<CandidateRegion> extract_candidates(const PageImage& page, const PipelineConfig& cfg) {
  const BinaryImage binary = binarize(page, cfg);
  auto regions = connected_components(binary);
  regions = remove_edges(std::move(regions), page.pixels.width(), page.pixels.height(), cfg);
  regions = merge_regions(std::move(regions), cfg.merge_dist, page.pixels.width());
  return heuristic_filter(regions, page, cfg);
}

}  // namespace signet::extract
