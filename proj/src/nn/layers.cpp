#include "signet/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace signet::nn {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXf>;
using CMapVec = Eigen::Map<const Eigen::VectorXf>;

namespace {

Param make_param(int n, int c, int h, int w) {
  return Param{{}, Tensor(n, c, h, w), Tensor(n, c, h, w)};
}

void register_param(Param& p, const std::string& name, std::vector<Param*>& out) {
  p.name = name;
  out.push_back(&p);
}

void fill_normal(Tensor& t, float stddev, Rng& rng) {
  std::normal_distribution<float> dist(0.0F, stddev);
  for (float& v : t.values()) v = dist(rng);
}

void push_shape(Saved& s, const Tensor& t) {
  s.indices.insert(s.indices.end(), {static_cast<std::uint32_t>(t.n()), static_cast<std::uint32_t>(t.c()),
                                     static_cast<std::uint32_t>(t.h()), static_cast<std::uint32_t>(t.w())});
}

Tensor zeros_of_saved_shape(const Saved& s, std::size_t at = 0) {
  return Tensor(static_cast<int>(s.indices[at]), static_cast<int>(s.indices[at + 1]),
                static_cast<int>(s.indices[at + 2]), static_cast<int>(s.indices[at + 3]));
}

struct ConvGeom {
  int in, h, w, k, stride, pad, oh, ow;
  int rows() const { return in * k * k; }
  int cols() const { return oh * ow; }
};

void im2col(const float* src, const ConvGeom& g, float* col) {
  for (int c = 0; c < g.in; ++c) {
    const float* plane = src + static_cast<std::size_t>(c) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        float* dst = col + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * g.cols();
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          float* out = dst + static_cast<std::size_t>(oy) * g.ow;
          if (iy < 0 || iy >= g.h) {
            std::fill_n(out, g.ow, 0.0F);
            continue;
          }
          const float* row = plane + static_cast<std::size_t>(iy) * g.w;
          for (int ox = 0; ox < g.ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            out[ox] = (ix >= 0 && ix < g.w) ? row[ix] : 0.0F;
          }
        }
      }
    }
  }
}

// Per-thread im2col buffers, grown on demand and never shrunk; fresh
// multi-megabyte vectors per call cost more than the GEMM for thin layers.
float* scratch(std::size_t n, int slot) {
  thread_local std::vector<float> buffers[2];
  auto& b = buffers[slot];
  if (b.size() < n) b.resize(n);
  return b.data();
}

void col2im(const float* col, const ConvGeom& g, float* dst) {
  for (int c = 0; c < g.in; ++c) {
    float* plane = dst + static_cast<std::size_t>(c) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const float* src = col + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * g.cols();
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          float* row = plane + static_cast<std::size_t>(iy) * g.w;
          const float* in = src + static_cast<std::size_t>(oy) * g.ow;
          for (int ox = 0; ox < g.ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) row[ix] += in[ox];
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------- Layer

void Layer::collect_params(const std::string&, std::vector<Param*>&) {}
void Layer::init(Rng&) {}

// ----------------------------------------------------------- Sequential

Sequential& Sequential::add(LayerPtr layer) {
  layers_.push_back(std::move(layer));
  return *this;
}

Tensor Sequential::forward(const Tensor& x, Saved* saved) const {
  if (saved != nullptr) saved->children.assign(layers_.size(), Saved{});
  Tensor cur = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    cur = layers_[i]->forward(cur, saved != nullptr ? &saved->children[i] : nullptr);
  }
  return cur;
}

Tensor Sequential::backward(const Tensor& grad_out, const Saved& saved) {
  if (saved.children.size() != layers_.size()) throw InvalidInput("backward without forward trace");
  Tensor g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g, saved.children[i]);
  return g;
}

void Sequential::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->collect_params(prefix + std::to_string(i) + ".", out);
  }
}

void Sequential::init(Rng& rng) {
  for (auto& l : layers_) l->init(rng);
}

nlohmann::json Sequential::describe() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) layers.push_back(l->describe());
  return {{"type", "sequential"}, {"layers", layers}};
}

std::vector<Param*> Sequential::params() {
  std::vector<Param*> out;
  collect_params("", out);
  return out;
}

void Sequential::zero_grad() {
  for (Param* p : params()) p->grad.fill(0.0F);
}

std::size_t Sequential::parameter_count() {
  std::size_t n = 0;
  for (Param* p : params()) n += p->value.size();
  return n;
}

// --------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding)
    : in_(in_channels), out_(out_channels), k_(kernel), stride_(stride),
      pad_(padding < 0 ? kernel / 2 : padding),
      weight_(make_param(out_channels, in_channels, kernel, kernel)),
      bias_(make_param(1, out_channels, 1, 1)) {
  if (in_ <= 0 || out_ <= 0 || k_ <= 0 || stride_ <= 0) throw InvalidInput("bad conv geometry");
}

Tensor Conv2d::forward(const Tensor& x, Saved* saved) const {
  if (x.c() != in_) {
    throw InvalidInput("conv expects " + std::to_string(in_) + " channels, got " + x.shape_string());
  }
  ConvGeom g{in_, x.h(), x.w(), k_, stride_, pad_, 0, 0};
  g.oh = (x.h() + 2 * pad_ - k_) / stride_ + 1;
  g.ow = (x.w() + 2 * pad_ - k_) / stride_ + 1;
  if (g.oh <= 0 || g.ow <= 0) throw InvalidInput("conv input too small " + x.shape_string());

  Tensor y(x.n(), out_, g.oh, g.ow);
  float* col = scratch(static_cast<std::size_t>(g.rows()) * g.cols(), 0);
  const CMapMat w(weight_.value.data(), out_, g.rows());
  const CMapVec b(bias_.value.data(), out_);
  for (int i = 0; i < x.n(); ++i) {
    im2col(x.sample(i), g, col);
    MapMat out(y.sample(i), out_, g.cols());
    out.noalias() = w * CMapMat(col, g.rows(), g.cols());
    out.colwise() += b;
  }
  if (saved != nullptr) saved->tensors = {x};
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out, const Saved& saved) {
  const Tensor& x = saved.tensors.at(0);
  ConvGeom g{in_, x.h(), x.w(), k_, stride_, pad_, grad_out.h(), grad_out.w()};
  Tensor dx(x.n(), x.c(), x.h(), x.w());
  const std::size_t len = static_cast<std::size_t>(g.rows()) * g.cols();
  float* col = scratch(len, 0);
  float* dcol = scratch(len, 1);
  const CMapMat w(weight_.value.data(), out_, g.rows());
  MapMat dw(weight_.grad.data(), out_, g.rows());
  MapVec db(bias_.grad.data(), out_);
  for (int i = 0; i < x.n(); ++i) {
    im2col(x.sample(i), g, col);
    const CMapMat dy(grad_out.sample(i), out_, g.cols());
    dw.noalias() += dy * CMapMat(col, g.rows(), g.cols()).transpose();
    db += dy.rowwise().sum();
    MapMat(dcol, g.rows(), g.cols()).noalias() = w.transpose() * dy;
    col2im(dcol, g, dx.sample(i));
  }
  return dx;
}

void Conv2d::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  register_param(weight_, prefix + "weight", out);
  register_param(bias_, prefix + "bias", out);
}

void Conv2d::init(Rng& rng) {
  fill_normal(weight_.value, std::sqrt(2.0F / static_cast<float>(in_ * k_ * k_)), rng);
  bias_.value.fill(0.0F);
}

nlohmann::json Conv2d::describe() const {
  return {{"type", "conv2d"}, {"in", in_}, {"out", out_}, {"k", k_}, {"stride", stride_}, {"pad", pad_}};
}

// ---------------------------------------------------------------- Dense

Dense::Dense(int in_features, int out_features)
    : in_(in_features), out_(out_features), weight_(make_param(1, 1, out_features, in_features)),
      bias_(make_param(1, 1, 1, out_features)) {
  if (in_ <= 0 || out_ <= 0) throw InvalidInput("bad dense geometry");
}

Tensor Dense::forward(const Tensor& x, Saved* saved) const {
  if (x.sample_size() != static_cast<std::size_t>(in_)) {
    throw InvalidInput("dense expects " + std::to_string(in_) + " features, got " + x.shape_string());
  }
  Tensor y(x.n(), out_, 1, 1);
  const CMapMat in(x.data(), x.n(), in_);
  const CMapMat w(weight_.value.data(), out_, in_);
  MapMat out(y.data(), x.n(), out_);
  out.noalias() = in * w.transpose();
  out.rowwise() += CMapVec(bias_.value.data(), out_).transpose();
  if (saved != nullptr) saved->tensors = {x};
  return y;
}

Tensor Dense::backward(const Tensor& grad_out, const Saved& saved) {
  const Tensor& x = saved.tensors.at(0);
  const CMapMat in(x.data(), x.n(), in_);
  const CMapMat dy(grad_out.data(), x.n(), out_);
  MapMat(weight_.grad.data(), out_, in_).noalias() += dy.transpose() * in;
  MapVec(bias_.grad.data(), out_) += dy.colwise().sum().transpose();
  Tensor dx(x.n(), x.c(), x.h(), x.w());
  MapMat(dx.data(), x.n(), in_).noalias() = dy * CMapMat(weight_.value.data(), out_, in_);
  return dx;
}

void Dense::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  register_param(weight_, prefix + "weight", out);
  register_param(bias_, prefix + "bias", out);
}

void Dense::init(Rng& rng) {
  fill_normal(weight_.value, std::sqrt(2.0F / static_cast<float>(in_)), rng);
  bias_.value.fill(0.0F);
}

nlohmann::json Dense::describe() const { return {{"type", "dense"}, {"in", in_}, {"out", out_}}; }

// --------------------------------------------------------- InstanceNorm

InstanceNorm::InstanceNorm(int channels)
    : channels_(channels), gamma_(make_param(1, channels, 1, 1)), beta_(make_param(1, channels, 1, 1)) {
  gamma_.value.fill(1.0F);
}

Tensor InstanceNorm::forward(const Tensor& x, Saved* saved) const {
  if (x.c() != channels_) throw InvalidInput("instance norm channel mismatch");
  constexpr float kEps = 1e-5F;
  const int hw = x.h() * x.w();
  Tensor y(x.n(), x.c(), x.h(), x.w());
  Tensor xhat;
  Tensor inv_std;
  if (saved != nullptr) {
    xhat = Tensor(x.n(), x.c(), x.h(), x.w());
    inv_std = Tensor(x.n(), x.c(), 1, 1);
  }
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * x.c() + c) * hw;
      const float* src = x.data() + off;
      double mean = 0.0;
      for (int i = 0; i < hw; ++i) mean += src[i];
      mean /= hw;
      double var = 0.0;
      for (int i = 0; i < hw; ++i) var += (src[i] - mean) * (src[i] - mean);
      var /= hw;
      const float inv = static_cast<float>(1.0 / std::sqrt(var + kEps));
      const float gm = gamma_.value.data()[c];
      const float bt = beta_.value.data()[c];
      float* dst = y.data() + off;
      for (int i = 0; i < hw; ++i) {
        const float nrm = (src[i] - static_cast<float>(mean)) * inv;
        dst[i] = gm * nrm + bt;
        if (saved != nullptr) xhat.data()[off + i] = nrm;
      }
      if (saved != nullptr) inv_std.at(n, c, 0, 0) = inv;
    }
  }
  if (saved != nullptr) saved->tensors = {std::move(xhat), std::move(inv_std)};
  return y;
}

Tensor InstanceNorm::backward(const Tensor& grad_out, const Saved& saved) {
  const Tensor& xhat = saved.tensors.at(0);
  const Tensor& inv_std = saved.tensors.at(1);
  const int hw = xhat.h() * xhat.w();
  Tensor dx(xhat.n(), xhat.c(), xhat.h(), xhat.w());
  for (int n = 0; n < xhat.n(); ++n) {
    for (int c = 0; c < xhat.c(); ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * xhat.c() + c) * hw;
      const float* dy = grad_out.data() + off;
      const float* xh = xhat.data() + off;
      const float gm = gamma_.value.data()[c];
      double sum_dy = 0.0;
      double sum_dy_xh = 0.0;
      for (int i = 0; i < hw; ++i) {
        sum_dy += dy[i];
        sum_dy_xh += dy[i] * xh[i];
      }
      gamma_.grad.data()[c] += static_cast<float>(sum_dy_xh);
      beta_.grad.data()[c] += static_cast<float>(sum_dy);
      const double inv = inv_std.at(n, c, 0, 0);
      float* out = dx.data() + off;
      for (int i = 0; i < hw; ++i) {
        out[i] = static_cast<float>(gm * inv / hw * (hw * dy[i] - sum_dy - xh[i] * sum_dy_xh));
      }
    }
  }
  return dx;
}

void InstanceNorm::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  register_param(gamma_, prefix + "gamma", out);
  register_param(beta_, prefix + "beta", out);
}

void InstanceNorm::init(Rng&) {
  gamma_.value.fill(1.0F);
  beta_.value.fill(0.0F);
}

nlohmann::json InstanceNorm::describe() const {
  return {{"type", "instance_norm"}, {"channels", channels_}};
}

// --------------------------------------------------------------- pooling

Tensor MaxPool2::forward(const Tensor& x, Saved* saved) const {
  const int oh = x.h() / 2;
  const int ow = x.w() / 2;
  if (oh == 0 || ow == 0) throw InvalidInput("maxpool input too small " + x.shape_string());
  Tensor y(x.n(), x.c(), oh, ow);
  if (saved != nullptr) {
    saved->indices.clear();
    push_shape(*saved, x);
    saved->indices.reserve(4 + y.size());
  }
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          int best_y = 2 * oy;
          int best_x = 2 * ox;
          float best = x.at(n, c, best_y, best_x);
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const float v = x.at(n, c, 2 * oy + dy, 2 * ox + dx);
              if (v > best) {
                best = v;
                best_y = 2 * oy + dy;
                best_x = 2 * ox + dx;
              }
            }
          }
          y.at(n, c, oy, ox) = best;
          if (saved != nullptr) {
            saved->indices.push_back(static_cast<std::uint32_t>(
                ((static_cast<std::size_t>(n) * x.c() + c) * x.h() + best_y) * x.w() + best_x));
          }
        }
      }
    }
  }
  return y;
}

Tensor MaxPool2::backward(const Tensor& grad_out, const Saved& saved) {
  Tensor dx = zeros_of_saved_shape(saved);
  const float* g = grad_out.data();
  for (std::size_t i = 0; i < grad_out.size(); ++i) dx.data()[saved.indices[4 + i]] += g[i];
  return dx;
}

Tensor AvgPool::forward(const Tensor& x, Saved* saved) const {
  const int oh = x.h() / k_;
  const int ow = x.w() / k_;
  if (oh == 0 || ow == 0) throw InvalidInput("avgpool input too small " + x.shape_string());
  Tensor y(x.n(), x.c(), oh, ow);
  const float scale = 1.0F / static_cast<float>(k_ * k_);
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          float acc = 0.0F;
          for (int dy = 0; dy < k_; ++dy) {
            for (int dx = 0; dx < k_; ++dx) acc += x.at(n, c, oy * k_ + dy, ox * k_ + dx);
          }
          y.at(n, c, oy, ox) = acc * scale;
        }
      }
    }
  }
  if (saved != nullptr) {
    saved->indices.clear();
    push_shape(*saved, x);
  }
  return y;
}

Tensor AvgPool::backward(const Tensor& grad_out, const Saved& saved) {
  Tensor dx = zeros_of_saved_shape(saved);
  const float scale = 1.0F / static_cast<float>(k_ * k_);
  for (int n = 0; n < grad_out.n(); ++n) {
    for (int c = 0; c < grad_out.c(); ++c) {
      for (int oy = 0; oy < grad_out.h(); ++oy) {
        for (int ox = 0; ox < grad_out.w(); ++ox) {
          const float g = grad_out.at(n, c, oy, ox) * scale;
          for (int dy = 0; dy < k_; ++dy) {
            for (int dx2 = 0; dx2 < k_; ++dx2) dx.at(n, c, oy * k_ + dy, ox * k_ + dx2) += g;
          }
        }
      }
    }
  }
  return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, Saved* saved) const {
  Tensor y(x.n(), x.c(), 1, 1);
  const int hw = x.h() * x.w();
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const float* p = x.data() + (static_cast<std::size_t>(n) * x.c() + c) * hw;
      double acc = 0.0;
      for (int i = 0; i < hw; ++i) acc += p[i];
      y.at(n, c, 0, 0) = static_cast<float>(acc / hw);
    }
  }
  if (saved != nullptr) {
    saved->indices.clear();
    push_shape(*saved, x);
  }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out, const Saved& saved) {
  Tensor dx = zeros_of_saved_shape(saved);
  const int hw = dx.h() * dx.w();
  for (int n = 0; n < dx.n(); ++n) {
    for (int c = 0; c < dx.c(); ++c) {
      const float g = grad_out.at(n, c, 0, 0) / static_cast<float>(hw);
      float* p = dx.data() + (static_cast<std::size_t>(n) * dx.c() + c) * hw;
      std::fill_n(p, hw, g);
    }
  }
  return dx;
}

Tensor Upsample2::forward(const Tensor& x, Saved*) const {
  Tensor y(x.n(), x.c(), x.h() * 2, x.w() * 2);
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      for (int yy = 0; yy < y.h(); ++yy) {
        for (int xx = 0; xx < y.w(); ++xx) y.at(n, c, yy, xx) = x.at(n, c, yy / 2, xx / 2);
      }
    }
  }
  return y;
}

Tensor Upsample2::backward(const Tensor& grad_out, const Saved&) {
  Tensor dx(grad_out.n(), grad_out.c(), grad_out.h() / 2, grad_out.w() / 2);
  for (int n = 0; n < grad_out.n(); ++n) {
    for (int c = 0; c < grad_out.c(); ++c) {
      for (int yy = 0; yy < grad_out.h(); ++yy) {
        for (int xx = 0; xx < grad_out.w(); ++xx) {
          dx.at(n, c, yy / 2, xx / 2) += grad_out.at(n, c, yy, xx);
        }
      }
    }
  }
  return dx;
}

Tensor Flatten::forward(const Tensor& x, Saved* saved) const {
  if (saved != nullptr) {
    saved->indices.clear();
    push_shape(*saved, x);
  }
  return x.reshaped(x.n(), static_cast<int>(x.sample_size()), 1, 1);
}

Tensor Flatten::backward(const Tensor& grad_out, const Saved& saved) {
  return grad_out.reshaped(static_cast<int>(saved.indices[0]), static_cast<int>(saved.indices[1]),
                           static_cast<int>(saved.indices[2]), static_cast<int>(saved.indices[3]));
}

// ----------------------------------------------------------- activations

Tensor ReLU::forward(const Tensor& x, Saved* saved) const {
  Tensor y = x;
  for (float& v : y.values()) v = v > 0.0F ? v : 0.0F;
  if (saved != nullptr) saved->tensors = {y};
  return y;
}

Tensor ReLU::backward(const Tensor& grad_out, const Saved& saved) {
  const Tensor& y = saved.tensors.at(0);
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (y.data()[i] <= 0.0F) dx.data()[i] = 0.0F;
  }
  return dx;
}

Tensor LeakyReLU::forward(const Tensor& x, Saved* saved) const {
  Tensor y = x;
  for (float& v : y.values()) v = v > 0.0F ? v : v * slope_;
  if (saved != nullptr) saved->tensors = {x};
  return y;
}

Tensor LeakyReLU::backward(const Tensor& grad_out, const Saved& saved) {
  const Tensor& x = saved.tensors.at(0);
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (x.data()[i] <= 0.0F) dx.data()[i] *= slope_;
  }
  return dx;
}

Tensor Sigmoid::forward(const Tensor& x, Saved* saved) const {
  Tensor y = x;
  for (float& v : y.values()) v = 1.0F / (1.0F + std::exp(-v));
  if (saved != nullptr) saved->tensors = {y};
  return y;
}

Tensor Sigmoid::backward(const Tensor& grad_out, const Saved& saved) {
  const Tensor& y = saved.tensors.at(0);
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    const float s = y.data()[i];
    dx.data()[i] *= s * (1.0F - s);
  }
  return dx;
}

Tensor Invert::forward(const Tensor& x, Saved*) const {
  Tensor y = x;
  for (float& v : y.values()) v = 1.0F - v;
  return y;
}

Tensor Invert::backward(const Tensor& grad_out, const Saved&) {
  Tensor dx = grad_out;
  for (float& v : dx.values()) v = -v;
  return dx;
}

// ------------------------------------------------------------ composites

Tensor Residual::forward(const Tensor& x, Saved* saved) const {
  if (saved != nullptr) saved->children.assign(1, Saved{});
  Tensor y = body_->forward(x, saved != nullptr ? &saved->children[0] : nullptr);
  y += x;
  return y;
}

Tensor Residual::backward(const Tensor& grad_out, const Saved& saved) {
  Tensor dx = body_->backward(grad_out, saved.children.at(0));
  dx += grad_out;
  return dx;
}

void Residual::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  body_->collect_params(prefix + "body.", out);
}

void Residual::init(Rng& rng) { body_->init(rng); }

nlohmann::json Residual::describe() const {
  return {{"type", "residual"}, {"body", body_->describe()}};
}

Tensor LogitSkip::forward(const Tensor& x, Saved* saved) const {
  if (saved != nullptr) saved->children.assign(1, Saved{});
  Tensor h = body_->forward(x, saved != nullptr ? &saved->children[0] : nullptr);
  if (!h.same_shape(x)) throw InvalidInput("logit-skip body must preserve shape");
  for (std::size_t i = 0; i < h.size(); ++i) {
    const float v = std::clamp(x.data()[i], eps_, 1.0F - eps_);
    const float z = std::log(v / (1.0F - v)) + h.data()[i];
    h.data()[i] = 1.0F / (1.0F + std::exp(-z));
  }
  if (saved != nullptr) saved->tensors = {x, h};
  return h;
}

Tensor LogitSkip::backward(const Tensor& grad_out, const Saved& saved) {
  const Tensor& x = saved.tensors.at(0);
  const Tensor& y = saved.tensors.at(1);
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const float s = y.data()[i];
    g.data()[i] *= s * (1.0F - s);
  }
  Tensor dx = body_->backward(g, saved.children.at(0));
  for (std::size_t i = 0; i < dx.size(); ++i) {
    const float v = x.data()[i];
    if (v > eps_ && v < 1.0F - eps_) dx.data()[i] += g.data()[i] / (v * (1.0F - v));
  }
  return dx;
}

void LogitSkip::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  body_->collect_params(prefix + "body.", out);
}

void LogitSkip::init(Rng& rng) { body_->init(rng); }

nlohmann::json LogitSkip::describe() const {
  return {{"type", "logit_skip"}, {"eps", eps_}, {"body", body_->describe()}};
}

// --------------------------------------------------------------- factory

std::unique_ptr<Sequential> make_sequential(const nlohmann::json& desc) {
  if (desc.value("type", "") != "sequential") throw InvalidInput("expected a sequential descriptor");
  auto seq = std::make_unique<Sequential>();
  for (const auto& l : desc.at("layers")) seq->add(make_layer(l));
  return seq;
}

LayerPtr make_layer(const nlohmann::json& d) {
  const std::string type = d.at("type").get<std::string>();
  if (type == "sequential") return make_sequential(d);
  if (type == "conv2d") {
    return std::make_unique<Conv2d>(d.at("in").get<int>(), d.at("out").get<int>(),
                                    d.at("k").get<int>(), d.at("stride").get<int>(),
                                    d.at("pad").get<int>());
  }
  if (type == "dense") return std::make_unique<Dense>(d.at("in").get<int>(), d.at("out").get<int>());
  if (type == "instance_norm") return std::make_unique<InstanceNorm>(d.at("channels").get<int>());
  if (type == "maxpool2") return std::make_unique<MaxPool2>();
  if (type == "avgpool") return std::make_unique<AvgPool>(d.at("k").get<int>());
  if (type == "global_avgpool") return std::make_unique<GlobalAvgPool>();
  if (type == "upsample2") return std::make_unique<Upsample2>();
  if (type == "flatten") return std::make_unique<Flatten>();
  if (type == "relu") return std::make_unique<ReLU>();
  if (type == "leaky_relu") return std::make_unique<LeakyReLU>(d.at("slope").get<float>());
  if (type == "sigmoid") return std::make_unique<Sigmoid>();
  if (type == "invert") return std::make_unique<Invert>();
  if (type == "residual") return std::make_unique<Residual>(make_sequential(d.at("body")));
  if (type == "logit_skip") {
    return std::make_unique<LogitSkip>(make_sequential(d.at("body")), d.at("eps").get<float>());
  }
  throw InvalidInput("unknown layer type '" + type + "'");
}

}  // namespace signet::nn
