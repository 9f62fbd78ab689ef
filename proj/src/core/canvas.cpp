#include "signet/core/canvas.hpp"

#include <algorithm>
#include <cmath>

namespace signet {

namespace {

struct Tap {
  int index;
  double weight;
};

// Footprint of each destination cell on the source axis, normalized to sum 1.
std::vector<std::vector<Tap>> axis_taps(int src_len, int dst_len) {
  std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(dst_len));
  const double step = static_cast<double>(src_len) / static_cast<double>(dst_len);
  for (int d = 0; d < dst_len; ++d) {
    const double lo = d * step;
    const double hi = (d + 1) * step;
    const int first = static_cast<int>(std::floor(lo));
    const int last = std::min(src_len - 1, static_cast<int>(std::ceil(hi)) - 1);
    double total = 0.0;
    auto& row = taps[static_cast<std::size_t>(d)];
    for (int s = first; s <= last; ++s) {
      const double w = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
      if (w > 1e-12) {
        row.push_back({s, w});
        total += w;
      }
    }
    for (auto& t : row) t.weight /= total;
  }
  return taps;
}

}  // namespace

GrayGrid resample_area(const GrayGrid& src, int width, int height) {
  if (src.empty()) throw InvalidInput("cannot resample an empty grid");
  if (width <= 0 || height <= 0) throw InvalidInput("resample target must be positive");
  if (width == src.width() && height == src.height()) return src;

  const auto xt = axis_taps(src.width(), width);
  const auto yt = axis_taps(src.height(), height);

  // Horizontal pass into a width x src.height buffer, then vertical.
  std::vector<double> tmp(static_cast<std::size_t>(width) * src.height());
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (const auto& t : xt[static_cast<std::size_t>(x)]) acc += t.weight * src(t.index, y);
      tmp[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  GrayGrid out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (const auto& t : yt[static_cast<std::size_t>(y)]) {
        acc += t.weight * tmp[static_cast<std::size_t>(t.index) * width + x];
      }
      out(x, y) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
    }
  }
  return out;
}

GrayGrid crop_grid(const GrayGrid& src, const BBox& box) {
  if (!box.valid() || box.x_min < 0 || box.y_min < 0 || box.x_max >= src.width() ||
      box.y_max >= src.height()) {
    throw InvalidInput("crop box outside grid");
  }
  GrayGrid out(box.width(), box.height());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) out(x, y) = src(box.x_min + x, box.y_min + y);
  }
  return out;
}

SignatureImage normalize_to_canvas(const GrayGrid& crop, Provenance provenance) {
  if (crop.empty()) throw InvalidInput("empty crop");
  for (float v : crop.cells()) {
    if (!(v >= 0.0F && v <= 1.0F)) throw InvalidInput("crop intensity outside [0,1]");
  }

  SignatureImage img;
  img.provenance = std::move(provenance);
  const int longer = std::max(crop.width(), crop.height());
  const double scale = static_cast<double>(kCanvasSize) / longer;
  const int w = std::clamp(static_cast<int>(std::lround(crop.width() * scale)), 1, kCanvasSize);
  const int h = std::clamp(static_cast<int>(std::lround(crop.height() * scale)), 1, kCanvasSize);
  const GrayGrid content = resample_area(crop, w, h);

  const int ox = (kCanvasSize - w) / 2;
  const int oy = (kCanvasSize - h) / 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) img.pixels(ox + x, oy + y) = content(x, y);
  }
  return img;
}

}  // namespace signet
