#include "signet/clean/clean.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "signet/core/canvas.hpp"
#include "signet/core/errors.hpp"
#include "signet/nn/loss.hpp"
#include "signet/nn/optim.hpp"
#include "signet/util/image_io.hpp"
#include "signet/util/seed.hpp"

namespace signet::clean {

namespace {

using nn::Sequential;
using nn::Tensor;

std::unique_ptr<Sequential> conv_block(int in, int out, int k, int stride, int pad, bool relu = true) {
  auto s = std::make_unique<Sequential>();
  s->emplace<nn::Conv2d>(in, out, k, stride, pad);
  s->emplace<nn::InstanceNorm>(out);
  if (relu) s->emplace<nn::ReLU>();
  return s;
}

void append(Sequential& dst, std::unique_ptr<Sequential> block) { dst.add(std::move(block)); }

// Encoder, residual trunk and nearest-upsample decoder predicting a logit
// correction; the input is inverted so zero padding looks like paper.
std::unique_ptr<Sequential> build_generator(const CleanerArch& a) {
  auto body = std::make_unique<Sequential>();
  body->emplace<nn::Invert>();
  append(*body, conv_block(1, a.ngf, 7, 1, 3));
  append(*body, conv_block(a.ngf, 2 * a.ngf, 3, 2, 1));
  append(*body, conv_block(2 * a.ngf, 4 * a.ngf, 3, 2, 1));
  for (int i = 0; i < a.residual_blocks; ++i) {
    auto rb = conv_block(4 * a.ngf, 4 * a.ngf, 3, 1, 1);
    append(*rb, conv_block(4 * a.ngf, 4 * a.ngf, 3, 1, 1, false));
    body->emplace<nn::Residual>(std::move(rb));
  }
  body->emplace<nn::Upsample2>();
  append(*body, conv_block(4 * a.ngf, 2 * a.ngf, 3, 1, 1));
  body->emplace<nn::Upsample2>();
  append(*body, conv_block(2 * a.ngf, a.ngf, 3, 1, 1));
  body->emplace<nn::Conv2d>(a.ngf, 1, 3, 1, 1);
  auto g = std::make_unique<Sequential>();
  g->emplace<nn::LogitSkip>(std::move(body));
  return g;
}

std::unique_ptr<Sequential> build_discriminator(const CleanerArch& a) {
  auto d = std::make_unique<Sequential>();
  d->emplace<nn::Invert>();
  d->emplace<nn::Conv2d>(1, a.ndf, 4, 2, 1);
  d->emplace<nn::LeakyReLU>(0.2F);
  int ch = a.ndf;
  for (int i = 0; i < 3; ++i) {
    d->emplace<nn::Conv2d>(ch, 2 * ch, 4, 2, 1);
    d->emplace<nn::InstanceNorm>(2 * ch);
    d->emplace<nn::LeakyReLU>(0.2F);
    ch *= 2;
  }
  d->emplace<nn::Conv2d>(ch, 1, 3, 1, 1);
  d->emplace<nn::GlobalAvgPool>();
  return d;
}

void scale(Tensor& t, float s) {
  for (float& v : t.values()) v *= s;
}

Tensor batch_of(std::span<const SignatureImage> imgs) {
  std::vector<const SignatureImage*> ptrs;
  for (const auto& im : imgs) ptrs.push_back(&im);
  return nn::batch_from_images(ptrs);
}

Tensor one(const SignatureImage& img) {
  const SignatureImage* p = &img;
  return nn::batch_from_images(std::span(&p, 1));
}

double round_trip(const ImageMap& first, const ImageMap& second, const Tensor& batch, PixelReduction r) {
  const Tensor mid = first(batch);
  if (!mid.same_shape(batch)) throw InvalidInput("mapping changed shape " + batch.shape_string() + " -> " + mid.shape_string());
  const Tensor back = second(mid);
  if (!back.same_shape(batch)) throw InvalidInput("mapping changed shape " + mid.shape_string() + " -> " + back.shape_string());
  double total = 0.0;
  for (int i = 0; i < batch.n(); ++i) {
    double s = 0.0;
    const float* a = back.sample(i);
    const float* b = batch.sample(i);
    for (std::size_t k = 0; k < batch.sample_size(); ++k) s += std::abs(static_cast<double>(a[k]) - static_cast<double>(b[k]));
    if (r == PixelReduction::kMean) s /= static_cast<double>(batch.sample_size());
    total += s;
  }
  return total / batch.n();
}

std::vector<SignatureImage> read_dir(const std::filesystem::path& dir, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::vector<SignatureImage> out;
  if (!fs::is_directory(dir)) return out;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    GrayGrid g;
    try {
      g = io::read_gray(f);
    } catch (const Error&) {
    }
    if (g.empty()) {
      spdlog::warn("skipping non-image file {}", f.string());
      continue;
    }
    out.push_back(normalize_to_canvas(g, Provenance{fs::relative(f, root).string(), 0, {}}));
  }
  return out;
}

}  // namespace

CleanerModel CleanerModel::create(const CleanerArch& arch, std::uint64_t seed) {
  if (arch.ngf <= 0 || arch.ndf <= 0 || arch.residual_blocks < 0) throw InvalidInput("bad cleaner arch");
  CleanerModel m;
  nn::Rng rng(seed);
  for (const char* name : {"G", "F"}) {
    auto g = build_generator(arch);
    g->init(rng);
    auto params = g->params();
    for (auto* p : {params[params.size() - 2], params[params.size() - 1]}) {
      for (float& v : p->value.values()) v *= arch.output_gain;
    }
    m.ckpt_.nets[name] = std::move(g);
  }
  for (const char* name : {"DX", "DY"}) {
    auto d = build_discriminator(arch);
    d->init(rng);
    m.ckpt_.nets[name] = std::move(d);
  }
  m.ckpt_.meta = {{"kind", "cleaner"},
                  {"arch", {{"ngf", arch.ngf}, {"ndf", arch.ndf}, {"residual_blocks", arch.residual_blocks}}}};
  return m;
}

CleanerModel CleanerModel::from_checkpoint(nn::Checkpoint ckpt) {
  if (ckpt.meta.value("kind", "") != "cleaner") throw FormatError("checkpoint is not a cleaner model");
  for (const char* name : {"G", "F", "DX", "DY"}) ckpt.net(name);
  CleanerModel m;
  m.ckpt_ = std::move(ckpt);
  return m;
}

CleanerModel CleanerModel::load(const std::string& path) { return from_checkpoint(nn::load_checkpoint(path)); }

void CleanerModel::save(const std::string& path) { nn::save_checkpoint(ckpt_, path); }

double cycle_loss(const ImageMap& G, const ImageMap& F, const Tensor& batch_x, const Tensor& batch_y,
                  PixelReduction reduction) {
  if (batch_x.n() == 0 || batch_y.n() == 0 || batch_x.size() == 0 || batch_y.size() == 0) {
    throw InvalidInput("cycle loss needs non-empty batches");
  }
  return round_trip(G, F, batch_x, reduction) + round_trip(F, G, batch_y, reduction);
}

double cycle_loss(const CleanerModel& model, std::span<const SignatureImage> xs, std::span<const SignatureImage> ys,
                  PixelReduction reduction) {
  if (xs.empty() || ys.empty()) throw InvalidInput("cycle loss needs non-empty batches");
  const Sequential& g = model.G();
  const Sequential& f = model.F();
  return cycle_loss([&](const Tensor& t) { return g.forward(t, nullptr); },
                    [&](const Tensor& t) { return f.forward(t, nullptr); }, batch_of(xs), batch_of(ys), reduction);
}

SignatureImage clean(const CleanerModel& model, const SignatureImage& img) {
  img.validate();
  const Tensor y = model.G().forward(one(img), nullptr);
  SignatureImage out;
  out.pixels = nn::grid_from_sample(y, 0);
  out.provenance = img.provenance;
  out.state = SignatureState::kCleaned;
  return out;
}

std::vector<SignatureImage> clean_batch(const CleanerModel& model, std::span<const SignatureImage> imgs, int batch) {
  std::vector<SignatureImage> out;
  out.reserve(imgs.size());
  const std::size_t step = static_cast<std::size_t>(std::max(1, batch));
  for (std::size_t i = 0; i < imgs.size(); i += step) {
    const auto chunk = imgs.subspan(i, std::min(step, imgs.size() - i));
    const Tensor y = model.G().forward(batch_of(chunk), nullptr);
    for (std::size_t j = 0; j < chunk.size(); ++j) {
      SignatureImage s;
      s.pixels = nn::grid_from_sample(y, static_cast<int>(j));
      s.provenance = chunk[j].provenance;
      s.state = SignatureState::kCleaned;
      out.push_back(std::move(s));
    }
  }
  return out;
}

CleanTrainingSet load_clean_directory(const std::string& root_str) {
  namespace fs = std::filesystem;
  const fs::path root(root_str);
  if (!fs::is_directory(root)) throw SourceError("cleaner data directory not found: " + root_str);
  CleanTrainingSet set;
  set.unpaired_x = read_dir(root / "raw", root);
  set.unpaired_y = read_dir(root / "clean", root);
  const auto raw = read_dir(root / "paired" / "raw", root);
  const auto cleaned = read_dir(root / "paired" / "clean", root);
  std::map<std::string, const SignatureImage*> by_name;
  for (const auto& c : cleaned) by_name[fs::path(c.provenance.doc_id).filename().string()] = &c;
  for (const auto& r : raw) {
    const auto it = by_name.find(fs::path(r.provenance.doc_id).filename().string());
    if (it == by_name.end()) {
      spdlog::warn("paired raw image {} has no clean counterpart", r.provenance.doc_id);
      continue;
    }
    set.paired.emplace_back(r, *it->second);
  }
  return set;
}

CleanerTrainResult train_cleaner(const CleanTrainingSet& data, const CleanerTrainOptions& options) {
  if (data.unpaired_x.empty() || data.unpaired_y.empty()) throw DataError("unpaired training sets must be non-empty");
  if (options.epochs < 0) throw InvalidInput("epochs must be non-negative");
  for (const auto& im : data.unpaired_x) im.validate();
  for (const auto& im : data.unpaired_y) im.validate();
  for (const auto& [r, c] : data.paired) {
    r.validate();
    c.validate();
  }

  CleanerTrainResult result{CleanerModel::create(options.arch, options.seed), {}};
  CleanerModel& m = result.model;
  Sequential& G = m.G();
  Sequential& F = m.F();
  Sequential& DX = m.DX();
  Sequential& DY = m.DY();
  auto gen_params = G.params();
  for (auto* p : F.params()) gen_params.push_back(p);
  auto dis_params = DX.params();
  for (auto* p : DY.params()) dis_params.push_back(p);
  const nn::AdamOptions adam{.lr = options.learning_rate, .beta1 = 0.5F, .beta2 = 0.999F};
  nn::Adam opt_g(gen_params, adam);
  nn::Adam opt_d(dis_params, adam);

  std::mt19937_64 rng(mix_seed(options.seed, 2));
  const bool use_pairs = !data.paired.empty() && options.lambda_pair > 0.0;
  const auto lc = static_cast<float>(options.lambda_cyc);
  const auto lp = static_cast<float>(options.lambda_pair);
  std::vector<std::size_t> order(data.unpaired_x.size());
  if (options.decay_start < 0.0 || options.decay_start > 1.0) throw InvalidInput("decay_start must be in [0, 1]");
  const int constant_epochs = static_cast<int>(std::lround(options.decay_start * options.epochs));
  const int decay_epochs = options.epochs - constant_epochs;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const double factor =
        1.0 - static_cast<double>(std::max(0, epoch + 1 - constant_epochs)) / static_cast<double>(decay_epochs + 1);
    opt_g.options().lr = static_cast<float>(options.learning_rate * factor);
    opt_d.options().lr = opt_g.options().lr;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    CleanEpoch st;
    st.epoch = epoch;
    for (std::size_t xi : order) {
      const Tensor x = one(data.unpaired_x[xi]);
      const Tensor y =
          one(data.unpaired_y[std::uniform_int_distribution<std::size_t>(0, data.unpaired_y.size() - 1)(rng)]);

      // Generators: fool both critics, reconstruct both round trips, and
      // match the hand-cleaned target on a paired example.
      opt_g.zero_grad();
      nn::Saved s_gx, s_fgx, s_fy, s_gfy, s_dy, s_dx;
      const Tensor fake_y = G.forward(x, &s_gx);
      const Tensor rec_x = F.forward(fake_y, &s_fgx);
      const Tensor fake_x = F.forward(y, &s_fy);
      const Tensor rec_y = G.forward(fake_x, &s_gfy);
      const auto adv_y = nn::mse_to_constant(DY.forward(fake_y, &s_dy), 1.0F);
      const auto adv_x = nn::mse_to_constant(DX.forward(fake_x, &s_dx), 1.0F);
      auto cyc_x = nn::l1_loss(rec_x, x);
      auto cyc_y = nn::l1_loss(rec_y, y);
      scale(cyc_x.grad, lc);
      scale(cyc_y.grad, lc);

      Tensor d_fake_y = DY.backward(adv_y.grad, s_dy);
      d_fake_y += F.backward(cyc_x.grad, s_fgx);
      G.backward(d_fake_y, s_gx);
      Tensor d_fake_x = DX.backward(adv_x.grad, s_dx);
      d_fake_x += G.backward(cyc_y.grad, s_gfy);
      F.backward(d_fake_x, s_fy);

      if (use_pairs) {
        const auto& [raw, target] =
            data.paired[std::uniform_int_distribution<std::size_t>(0, data.paired.size() - 1)(rng)];
        nn::Saved s_p;
        const Tensor out = G.forward(one(raw), &s_p);
        auto pl = nn::l1_loss(out, one(target));
        scale(pl.grad, lp);
        G.backward(pl.grad, s_p);
        st.paired += pl.value;
      }
      opt_g.step();

      // Critics: least-squares real/fake targets on the fakes just made.
      opt_d.zero_grad();
      double d_loss = 0.0;
      for (auto [net, real, fake] : {std::tuple{&DY, &y, &fake_y}, std::tuple{&DX, &x, &fake_x}}) {
        nn::Saved s_real, s_fake;
        auto lr = nn::mse_to_constant(net->forward(*real, &s_real), 1.0F);
        auto lf = nn::mse_to_constant(net->forward(*fake, &s_fake), 0.0F);
        scale(lr.grad, 0.5F);
        scale(lf.grad, 0.5F);
        net->backward(lr.grad, s_real);
        net->backward(lf.grad, s_fake);
        d_loss += 0.5 * (lr.value + lf.value);
      }
      opt_d.step();

      st.generator += adv_x.value + adv_y.value;
      st.discriminator += d_loss;
      st.cycle += cyc_x.value + cyc_y.value;
    }
    const double steps = static_cast<double>(order.size());
    st.generator /= steps;
    st.discriminator /= steps;
    st.cycle /= steps;
    st.paired /= steps;
    spdlog::debug("cleaner epoch {} G {:.4f} D {:.4f} cyc {:.5f} pair {:.5f}", epoch, st.generator, st.discriminator,
                  st.cycle, st.paired);
    result.history.push_back(st);
  }
  m.checkpoint().meta["epochs_run"] = result.history.size();
  return result;
}

}  // namespace signet::clean
