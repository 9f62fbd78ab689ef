#pragma once

#include <vector>

#include "signet/nn/layers.hpp"

namespace signet::nn {

struct AdamOptions {
  float lr = 2e-4F;
  float beta1 = 0.5F;
  float beta2 = 0.999F;
  float eps = 1e-8F;
  float clip_norm = 0.0F;  // 0 disables global gradient clipping
};

/// Adam over a fixed parameter list. Moments are keyed by position, so the
/// list must not change between steps.
class Adam {
 public:
  Adam(std::vector<Param*> params, AdamOptions options = {});

  void zero_grad();
  /// Applies one update and returns the pre-clipping gradient L2 norm.
  double step();
  AdamOptions& options() noexcept { return options_; }

 private:
  std::vector<Param*> params_;
  AdamOptions options_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  long long t_ = 0;
};

}  // namespace signet::nn
