#include "signet/nn/loss.hpp"

#include <cmath>

namespace signet::nn {

double sigmoid(double z) noexcept { return 1.0 / (1.0 + std::exp(-z)); }

LossResult bce_with_logits(const Tensor& logits, std::span<const float> targets) {
  if (logits.size() != targets.size() || targets.empty()) {
    throw InvalidInput("bce: " + std::to_string(targets.size()) + " targets for " +
                       logits.shape_string());
  }
  LossResult r{0.0, Tensor(logits.n(), logits.c(), logits.h(), logits.w())};
  const double inv_n = 1.0 / static_cast<double>(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double z = logits.data()[i];
    const double y = targets[i];
    // log(1 + e^-|z|) form keeps large |z| finite.
    r.value += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    r.grad.data()[i] = static_cast<float>((sigmoid(z) - y) * inv_n);
  }
  r.value *= inv_n;
  return r;
}

LossResult l1_loss(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target) || pred.size() == 0) {
    throw InvalidInput("l1: shape " + pred.shape_string() + " vs " + target.shape_string());
  }
  LossResult r{0.0, Tensor(pred.n(), pred.c(), pred.h(), pred.w())};
  const float inv_n = 1.0F / static_cast<float>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const float d = pred.data()[i] - target.data()[i];
    r.value += std::abs(d);
    r.grad.data()[i] = d > 0.0F ? inv_n : (d < 0.0F ? -inv_n : 0.0F);
  }
  r.value /= static_cast<double>(pred.size());
  return r;
}

LossResult mse_to_constant(const Tensor& pred, float target) {
  if (pred.size() == 0) throw InvalidInput("mse on empty tensor");
  LossResult r{0.0, Tensor(pred.n(), pred.c(), pred.h(), pred.w())};
  const float inv_n = 1.0F / static_cast<float>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const float d = pred.data()[i] - target;
    r.value += static_cast<double>(d) * d;
    r.grad.data()[i] = 2.0F * d * inv_n;
  }
  r.value /= static_cast<double>(pred.size());
  return r;
}

}  // namespace signet::nn
