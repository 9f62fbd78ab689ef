#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "signet/nn/tensor.hpp"

namespace signet::nn {

using Rng = std::mt19937_64;

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

/// Activations a layer keeps from forward() for its backward().
struct Saved {
  std::vector<Tensor> tensors;
  std::vector<std::uint32_t> indices;
  std::vector<Saved> children;
};

/// A differentiable stage. forward() is const and keeps no state, so one
/// layer can be evaluated several times per step (shared weights) and called
/// concurrently in inference. Passing saved == nullptr selects inference.
/// backward() accumulates parameter gradients and returns d(loss)/d(input).
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, Saved* saved) const = 0;
  virtual Tensor backward(const Tensor& grad_out, const Saved& saved) = 0;
  virtual void collect_params(const std::string& prefix, std::vector<Param*>& out);
  virtual void init(Rng& rng);
  virtual nlohmann::json describe() const = 0;
};

using LayerPtr = std::unique_ptr<Layer>;

class Sequential final : public Layer {
 public:
  Sequential() = default;
  Sequential& add(LayerPtr layer);
  template <typename L, typename... Args>
  Sequential& emplace(Args&&... args) {
    return add(std::make_unique<L>(std::forward<Args>(args)...));
  }

  Tensor forward(const Tensor& x, Saved* saved) const override;
  Tensor backward(const Tensor& grad_out, const Saved& saved) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  void init(Rng& rng) override;
  nlohmann::json describe() const override;

  std::vector<Param*> params();
  void zero_grad();
  std::size_t size() const noexcept { return layers_.size(); }
  std::size_t parameter_count();

 private:
  std::vector<LayerPtr> layers_;
};

/// Zero-padded 2-D convolution, im2col + GEMM.
class Conv2d final : public Layer {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride = 1, int padding = -1);
  Tensor forward(const Tensor& x, Saved* saved) const override;
  Tensor backward(const Tensor& grad_out, const Saved& saved) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  void init(Rng& rng) override;
  nlohmann::json describe() const override;

 private:
  int in_, out_, k_, stride_, pad_;
  Param weight_;  // (out, in, k, k)
  Param bias_;    // (1, out, 1, 1)
};

class Dense final : public Layer {
 public:
  Dense(int in_features, int out_features);
  Tensor forward(const Tensor& x, Saved* saved) const override;
  Tensor backward(const Tensor& grad_out, const Saved& saved) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  void init(Rng& rng) override;
  nlohmann::json describe() const override;

 private:
  int in_, out_;
  Param weight_;  // (1, 1, out, in)
  Param bias_;    // (1, 1, 1, out)
};

/// Per-sample, per-channel normalization with learned scale and shift.
class InstanceNorm final : public Layer {
 public:
  explicit InstanceNorm(int channels);
  Tensor forward(const Tensor& x, Saved* saved) const override;
  Tensor backward(const Tensor& grad_out, const Saved& saved) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  void init(Rng& rng) override;
  nlohmann::json describe() const override;

 private:
  int channels_;
  Param gamma_;
  Param beta_;
};

class MaxPool2 final : public Layer {
 public:
  Tensor forward(const Tensor& x, Saved* saved) const override;
  Tensor backward(const Tensor& grad_out, const Saved& saved) override;
  nlohmann::json describe() const override { return {{"type", "maxpool2"}}; }
};

class AvgPool final : public Layer {
 public:
  explicit AvgPool(int k) : k_(k) {}
  Tensor forward(const Tensor& x, Saved* saved) const override;
  Tensor backward(const Tensor& grad_out, const Saved& saved) override;
  nlohmann::json describe() const override { return {{"type", "avgpool"}, {"k", k_}}; }

 private:
  int k_;
};

class GlobalAvgPool final : public Layer {
 public:
  Tensor forward(const Tensor& x, Saved* saved) const override;
  Tensor backward(const Tensor& grad_out, const Saved& saved) override;
  nlohmann::json describe() const override { return {{"type", "global_avgpool"}}; }
};

/// Nearest-neighbour 2x upsampling.
class Upsample2 final : public Layer {
 public:
  Tensor forward(const Tensor& x, Saved* saved) const override;
  Tensor backward(const Tensor& grad_out, const Saved& saved) override;
  nlohmann::json describe() const override { return {{"type", "upsample2"}}; }
};

class Flatten final : public Layer {
 public:
  Tensor forward(const Tensor& x, Saved* saved) const override;
  Tensor backward(const Tensor& grad_out, const Saved& saved) override;
  nlohmann::json describe() const override { return {{"type", "flatten"}}; }
};

class ReLU final : public Layer {
 public:
  Tensor forward(const Tensor& x, Saved* saved) const override;
  Tensor backward(const Tensor& grad_out, const Saved& saved) override;
  nlohmann::json describe() const override { return {{"type", "relu"}}; }
};

class LeakyReLU final : public Layer {
 public:
  explicit LeakyReLU(float slope = 0.2F) : slope_(slope) {}
  Tensor forward(const Tensor& x, Saved* saved) const override;
  Tensor backward(const Tensor& grad_out, const Saved& saved) override;
  nlohmann::json describe() const override { return {{"type", "leaky_relu"}, {"slope", slope_}}; }

 private:
  float slope_;
};

class Sigmoid final : public Layer {
 public:
  Tensor forward(const Tensor& x, Saved* saved) const override;
  Tensor backward(const Tensor& grad_out, const Saved& saved) override;
  nlohmann::json describe() const override { return {{"type", "sigmoid"}}; }
};

/// y = 1 - x: turns white-background intensity into ink-is-positive input.
class Invert final : public Layer {
 public:
  Tensor forward(const Tensor& x, Saved* saved) const override;
  Tensor backward(const Tensor& grad_out, const Saved& saved) override;
  nlohmann::json describe() const override { return {{"type", "invert"}}; }
};

/// y = x + body(x).
class Residual final : public Layer {
 public:
  explicit Residual(std::unique_ptr<Sequential> body) : body_(std::move(body)) {}
  Tensor forward(const Tensor& x, Saved* saved) const override;
  Tensor backward(const Tensor& grad_out, const Saved& saved) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  void init(Rng& rng) override;
  nlohmann::json describe() const override;

 private:
  std::unique_ptr<Sequential> body_;
};

/// y = sigmoid(logit(clamp(x, eps, 1-eps)) + body(x)) for inputs in [0,1]:
/// body predicts a correction in logit space, so a zero body is (nearly) the
/// identity and outputs stay inside (0,1).
class LogitSkip final : public Layer {
 public:
  explicit LogitSkip(std::unique_ptr<Sequential> body, float eps = 0.01F)
      : body_(std::move(body)), eps_(eps) {}
  Tensor forward(const Tensor& x, Saved* saved) const override;
  Tensor backward(const Tensor& grad_out, const Saved& saved) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  void init(Rng& rng) override;
  nlohmann::json describe() const override;

 private:
  std::unique_ptr<Sequential> body_;
  float eps_;
};

/// Rebuilds a layer tree from describe() output (parameters uninitialized).
LayerPtr make_layer(const nlohmann::json& desc);
std::unique_ptr<Sequential> make_sequential(const nlohmann::json& desc);

}  // namespace signet::nn
