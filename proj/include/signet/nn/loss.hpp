#pragma once

#include <span>

#include "signet/nn/tensor.hpp"

namespace signet::nn {

struct LossResult {
  double value = 0.0;
  Tensor grad;  // d(value)/d(input), same shape as the input
};

/// Mean binary cross-entropy of sigmoid(logits) against targets in {0,1}.
LossResult bce_with_logits(const Tensor& logits, std::span<const float> targets);

/// Mean absolute difference over all elements.
LossResult l1_loss(const Tensor& pred, const Tensor& target);

/// Mean squared distance of every element to a constant target.
LossResult mse_to_constant(const Tensor& pred, float target);

double sigmoid(double z) noexcept;

}  // namespace signet::nn
