#include "signet/nn/optim.hpp"

#include <cmath>

namespace signet::nn {

Adam::Adam(std::vector<Param*> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Param* p : params_) {
    m_.emplace_back(p->value.size(), 0.0F);
    v_.emplace_back(p->value.size(), 0.0F);
  }
}

void Adam::zero_grad() {
  for (Param* p : params_) p->grad.fill(0.0F);
}

double Adam::step() {
  double sq = 0.0;
  for (const Param* p : params_) {
    for (float g : p->grad.values()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  float scale = 1.0F;
  if (options_.clip_norm > 0.0F && norm > options_.clip_norm) {
    scale = static_cast<float>(options_.clip_norm / norm);
  }

  ++t_;
  const float b1 = options_.beta1;
  const float b2 = options_.beta2;
  const float c1 = 1.0F - static_cast<float>(std::pow(b1, static_cast<double>(t_)));
  const float c2 = 1.0F - static_cast<float>(std::pow(b2, static_cast<double>(t_)));
  const float lr = options_.lr * std::sqrt(c2) / c1;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    float* w = params_[k]->value.data();
    const float* g = params_[k]->grad.data();
    float* m = m_[k].data();
    float* v = v_[k].data();
    const std::size_t n = m_[k].size();
    for (std::size_t i = 0; i < n; ++i) {
      const float gi = g[i] * scale;
      m[i] = b1 * m[i] + (1.0F - b1) * gi;
      v[i] = b2 * v[i] + (1.0F - b2) * gi * gi;
      w[i] -= lr * m[i] / (std::sqrt(v[i]) + options_.eps);
    }
  }
  return norm;
}

}  // namespace signet::nn
