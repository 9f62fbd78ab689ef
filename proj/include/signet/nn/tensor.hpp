#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "signet/core/types.hpp"

namespace signet::nn {

/// Dense NCHW float tensor.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int c, int h, int w, float fill = 0.0F);

  int n() const noexcept { return n_; }
  int c() const noexcept { return c_; }
  int h() const noexcept { return h_; }
  int w() const noexcept { return w_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t sample_size() const noexcept {
    return static_cast<std::size_t>(c_) * static_cast<std::size_t>(h_) *
           static_cast<std::size_t>(w_);
  }
  bool same_shape(const Tensor& o) const noexcept {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }
  std::string shape_string() const;

  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }
  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }
  float* sample(int i) noexcept { return data_.data() + sample_size() * static_cast<std::size_t>(i); }
  const float* sample(int i) const noexcept {
    return data_.data() + sample_size() * static_cast<std::size_t>(i);
  }
  float& at(int n, int c, int h, int w) noexcept {
    return data_[((static_cast<std::size_t>(n) * c_ + c) * h_ + h) * w_ + w];
  }
  float at(int n, int c, int h, int w) const noexcept {
    return data_[((static_cast<std::size_t>(n) * c_ + c) * h_ + h) * w_ + w];
  }

  /// Same storage, new shape with equal element count.
  Tensor reshaped(int n, int c, int h, int w) const&;
  Tensor reshaped(int n, int c, int h, int w) &&;

  void fill(float v) noexcept;
  Tensor& operator+=(const Tensor& o);

  /// Rows [begin, begin+count) along the batch axis.
  Tensor slice(int begin, int count) const;

 private:
  int n_ = 0;
  int c_ = 0;
  int h_ = 0;
  int w_ = 0;
  std::vector<float> data_;
};

/// Stacks 1-channel grids of identical size into an (n,1,h,w) batch.
Tensor batch_from_grids(std::span<const GrayGrid> grids);
Tensor batch_from_grid(const GrayGrid& grid);
/// Stacks canvas images into an (n,1,256,256) batch; validates each image.
Tensor batch_from_images(std::span<const SignatureImage* const> images);
/// Channel 0 of sample i as a grid, clamped to [0,1].
GrayGrid grid_from_sample(const Tensor& t, int i);

}  // namespace signet::nn
