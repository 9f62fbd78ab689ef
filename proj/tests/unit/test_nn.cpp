#include <doctest.h>

#include <cmath>
#include <random>

#include "signet/nn/checkpoint.hpp"
#include "signet/nn/layers.hpp"
#include "signet/nn/loss.hpp"
#include "signet/nn/optim.hpp"

using namespace signet::nn;

namespace {

Tensor random_tensor(int n, int c, int h, int w, Rng& rng, float lo = -1.0F, float hi = 1.0F) {
  std::uniform_real_distribution<float> d(lo, hi);
  Tensor t(n, c, h, w);
  for (float& v : t.values()) v = d(rng);
  return t;
}

// Scalar objective sum(y * probe) so d/dy = probe.
double objective(const Sequential& net, const Tensor& x, const Tensor& probe) {
  const Tensor y = net.forward(x, nullptr);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(y.data()[i]) * probe.data()[i];
  return s;
}

// Central differences on a float forward pass; tolerances are relative.
void check_gradients(Sequential& net, Tensor x, Rng& rng, double tol = 2e-2) {
  const Tensor y0 = net.forward(x, nullptr);
  const Tensor probe = random_tensor(y0.n(), y0.c(), y0.h(), y0.w(), rng);
  net.zero_grad();
  Saved saved;
  net.forward(x, &saved);
  const Tensor dx = net.backward(probe, saved);
  REQUIRE(dx.same_shape(x));

  const float h = 2e-3F;
  auto compare = [&](double analytic, double numeric) {
    const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    CHECK(std::abs(analytic - numeric) / scale < tol);
  };
  std::uniform_int_distribution<std::size_t> pick_x(0, x.size() - 1);
  for (int k = 0; k < 12; ++k) {
    const std::size_t i = pick_x(rng);
    const float keep = x.data()[i];
    x.data()[i] = keep + h;
    const double up = objective(net, x, probe);
    x.data()[i] = keep - h;
    const double down = objective(net, x, probe);
    x.data()[i] = keep;
    compare(dx.data()[i], (up - down) / (2.0 * h));
  }
  for (Param* p : net.params()) {
    std::uniform_int_distribution<std::size_t> pick(0, p->value.size() - 1);
    for (int k = 0; k < 6; ++k) {
      const std::size_t i = pick(rng);
      const float keep = p->value.data()[i];
      p->value.data()[i] = keep + h;
      const double up = objective(net, x, probe);
      p->value.data()[i] = keep - h;
      const double down = objective(net, x, probe);
      p->value.data()[i] = keep;
      compare(p->grad.data()[i], (up - down) / (2.0 * h));
    }
  }
}

}  // namespace

TEST_CASE("conv2d matches a direct convolution") {
  Rng rng(3);
  Conv2d conv(2, 3, 3, 2, 1);
  conv.init(rng);
  std::vector<Param*> ps;
  conv.collect_params("", ps);
  const Tensor x = random_tensor(2, 2, 7, 6, rng);
  const Tensor y = conv.forward(x, nullptr);
  REQUIRE(y.h() == 4);
  REQUIRE(y.w() == 3);
  const Tensor& w = ps[0]->value;
  const Tensor& b = ps[1]->value;
  for (int n = 0; n < 2; ++n) {
    for (int o = 0; o < 3; ++o) {
      for (int oy = 0; oy < y.h(); ++oy) {
        for (int ox = 0; ox < y.w(); ++ox) {
          double acc = b.at(0, o, 0, 0);
          for (int c = 0; c < 2; ++c) {
            for (int ky = 0; ky < 3; ++ky) {
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = oy * 2 - 1 + ky;
                const int ix = ox * 2 - 1 + kx;
                if (iy < 0 || ix < 0 || iy >= 7 || ix >= 6) continue;
                acc += w.at(o, c, ky, kx) * x.at(n, c, iy, ix);
              }
            }
          }
          CHECK(y.at(n, o, oy, ox) == doctest::Approx(acc).epsilon(1e-5));
        }
      }
    }
  }
}

TEST_CASE("backward agrees with finite differences") {
  Rng rng(11);
  SUBCASE("conv + leaky relu + instance norm") {
    Sequential net;
    net.emplace<Conv2d>(2, 3, 3, 1);
    net.emplace<InstanceNorm>(3);
    net.emplace<Conv2d>(3, 2, 3, 2);
    net.emplace<LeakyReLU>(0.2F);
    net.init(rng);
    check_gradients(net, random_tensor(2, 2, 8, 8, rng), rng);
  }
  SUBCASE("pooling, upsampling and dense") {
    Sequential net;
    net.emplace<Invert>();
    net.emplace<Conv2d>(1, 2, 3, 1);
    net.emplace<MaxPool2>();
    net.emplace<Upsample2>();
    net.emplace<AvgPool>(2);
    net.emplace<Flatten>();
    net.emplace<Dense>(2 * 4 * 4, 5);
    net.emplace<Sigmoid>();
    net.init(rng);
    check_gradients(net, random_tensor(3, 1, 8, 8, rng), rng);
  }
  SUBCASE("residual and global pooling") {
    auto body = std::make_unique<Sequential>();
    body->emplace<Conv2d>(2, 2, 3, 1);
    body->emplace<ReLU>();
    Sequential net;
    net.add(std::make_unique<Residual>(std::move(body)));
    net.emplace<GlobalAvgPool>();
    net.init(rng);
    check_gradients(net, random_tensor(2, 2, 6, 6, rng), rng);
  }
  SUBCASE("logit skip") {
    auto body = std::make_unique<Sequential>();
    body->emplace<Conv2d>(1, 1, 3, 1);
    Sequential net;
    net.add(std::make_unique<LogitSkip>(std::move(body)));
    net.init(rng);
    check_gradients(net, random_tensor(2, 1, 6, 6, rng, 0.1F, 0.9F), rng);
  }
}

TEST_CASE("bce gradient and value") {
  Tensor z(2, 1, 1, 1);
  z.data()[0] = 0.0F;
  z.data()[1] = 30.0F;
  const std::vector<float> y{1.0F, 0.0F};
  const auto r = bce_with_logits(z, y);
  CHECK(r.value == doctest::Approx((std::log(2.0) + 30.0) / 2.0).epsilon(1e-6));
  CHECK(r.grad.data()[0] == doctest::Approx(-0.25));
  CHECK(r.grad.data()[1] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("adam fits a linear map") {
  Rng rng(5);
  Sequential net;
  net.emplace<Dense>(3, 1);
  net.init(rng);
  Adam opt(net.params(), {.lr = 0.05F, .beta1 = 0.9F});
  const Tensor x = random_tensor(16, 3, 1, 1, rng);
  Tensor target(16, 1, 1, 1);
  for (int i = 0; i < 16; ++i) {
    target.data()[i] = 2.0F * x.at(i, 0, 0, 0) - x.at(i, 1, 0, 0) + 0.5F;
  }
  double last = 0.0;
  for (int step = 0; step < 400; ++step) {
    opt.zero_grad();
    Saved s;
    const Tensor y = net.forward(x, &s);
    Tensor diff = y;
    last = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const float d = y.data()[i] - target.data()[i];
      last += d * d;
      diff.data()[i] = 2.0F * d / 16.0F;
    }
    net.backward(diff, s);
    opt.step();
  }
  CHECK(last / 16.0 < 1e-4);
}

TEST_CASE("checkpoint round trip is exact") {
  Rng rng(9);
  Checkpoint ckpt;
  ckpt.meta = {{"kind", "test"}};
  auto net = std::make_unique<Sequential>();
  net->emplace<Conv2d>(1, 2, 3, 1);
  net->emplace<InstanceNorm>(2);
  net->emplace<Flatten>();
  net->emplace<Dense>(2 * 4 * 4, 2);
  net->init(rng);
  ckpt.nets["a"] = std::move(net);
  const auto bytes = serialize_checkpoint(ckpt);
  Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(back.meta == ckpt.meta);
  const Tensor x = random_tensor(1, 1, 4, 4, rng);
  const Tensor y0 = ckpt.net("a").forward(x, nullptr);
  const Tensor y1 = back.net("a").forward(x, nullptr);
  for (std::size_t i = 0; i < y0.size(); ++i) CHECK(y0.data()[i] == y1.data()[i]);

  auto cut = bytes;
  cut.resize(cut.size() - 3);
  CHECK_THROWS_AS(deserialize_checkpoint(cut), signet::FormatError);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(bad), signet::FormatError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.sgnm"), signet::StartupError);
}
