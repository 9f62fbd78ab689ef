#include "signet/nn/tensor.hpp"

#include <algorithm>

namespace signet::nn {

Tensor::Tensor(int n, int c, int h, int w, float fill)
    : n_(n), c_(c), h_(h), w_(w),
      data_(static_cast<std::size_t>(n) * c * h * w, fill) {
  if (n < 0 || c < 0 || h < 0 || w < 0) throw InvalidInput("negative tensor dimension");
}

std::string Tensor::shape_string() const {
  return "(" + std::to_string(n_) + "," + std::to_string(c_) + "," + std::to_string(h_) + "," +
         std::to_string(w_) + ")";
}

Tensor Tensor::reshaped(int n, int c, int h, int w) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(n, c, h, w);
}

Tensor Tensor::reshaped(int n, int c, int h, int w) && {
  if (static_cast<std::size_t>(n) * c * h * w != data_.size()) {
    throw InvalidInput("reshape " + shape_string() + " changes element count");
  }
  n_ = n;
  c_ = c;
  h_ = h;
  w_ = w;
  return std::move(*this);
}

void Tensor::fill(float v) noexcept { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& o) {
  if (!same_shape(o)) throw InvalidInput("shape mismatch " + shape_string() + " vs " + o.shape_string());
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Tensor Tensor::slice(int begin, int count) const {
  if (begin < 0 || count < 0 || begin + count > n_) throw InvalidInput("batch slice out of range");
  Tensor out(count, c_, h_, w_);
  std::copy_n(sample(begin), sample_size() * static_cast<std::size_t>(count), out.data());
  return out;
}

Tensor batch_from_grids(std::span<const GrayGrid> grids) {
  if (grids.empty()) return {};
  const int h = grids.front().height();
  const int w = grids.front().width();
  Tensor t(static_cast<int>(grids.size()), 1, h, w);
  for (std::size_t i = 0; i < grids.size(); ++i) {
    if (grids[i].width() != w || grids[i].height() != h) {
      throw InvalidInput("batch images differ in size");
    }
    std::copy(grids[i].cells().begin(), grids[i].cells().end(), t.sample(static_cast<int>(i)));
  }
  return t;
}

Tensor batch_from_grid(const GrayGrid& grid) { return batch_from_grids(std::span(&grid, 1)); }

Tensor batch_from_images(std::span<const SignatureImage* const> images) {
  if (images.empty()) throw InvalidInput("empty image batch");
  Tensor t(static_cast<int>(images.size()), 1, kCanvasSize, kCanvasSize);
  for (std::size_t i = 0; i < images.size(); ++i) {
    images[i]->validate();
    const auto cells = images[i]->pixels.cells();
    std::copy(cells.begin(), cells.end(), t.sample(static_cast<int>(i)));
  }
  return t;
}

GrayGrid grid_from_sample(const Tensor& t, int i) {
  GrayGrid g(t.w(), t.h());
  const float* p = t.sample(i);
  auto cells = g.cells();
  for (std::size_t k = 0; k < cells.size(); ++k) cells[k] = std::clamp(p[k], 0.0F, 1.0F);
  return g;
}

}  // namespace signet::nn
