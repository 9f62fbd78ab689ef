#include "signet/filter/filter.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "signet/core/canvas.hpp"
#include "signet/core/errors.hpp"
#include "signet/nn/loss.hpp"
#include "signet/nn/optim.hpp"
#include "signet/util/image_io.hpp"
#include "signet/util/seed.hpp"

namespace signet::filter {

namespace {

std::unique_ptr<nn::Sequential> build_net(const FilterArch& arch) {
  if (arch.conv_channels.empty() || arch.dense_units <= 0) throw InvalidInput("bad filter arch");
  auto net = std::make_unique<nn::Sequential>();
  net->emplace<nn::Invert>();
  int in = 1;
  int side = kCanvasSize;
  for (int ch : arch.conv_channels) {
    net->emplace<nn::Conv2d>(in, ch, 3);
    net->emplace<nn::ReLU>();
    net->emplace<nn::MaxPool2>();
    in = ch;
    side /= 2;
  }
  net->emplace<nn::Flatten>();
  net->emplace<nn::Dense>(in * side * side, arch.dense_units);
  net->emplace<nn::ReLU>();
  net->emplace<nn::Dense>(arch.dense_units, 1);
  return net;
}

std::vector<float> logits(const nn::Sequential& net, std::span<const SignatureImage* const> imgs) {
  const nn::Tensor y = net.forward(nn::batch_from_images(imgs), nullptr);
  return {y.values().begin(), y.values().end()};
}

}  // namespace

FilterModel FilterModel::create(const FilterArch& arch, std::uint64_t seed) {
  FilterModel m;
  auto net = build_net(arch);
  nn::Rng rng(seed);
  net->init(rng);
  // A near-zero output layer starts every score at about 0.5.
  auto params = net->params();
  for (float& v : params[params.size() - 2]->value.values()) v *= 0.05F;
  m.ckpt_.nets["filter"] = std::move(net);
  m.ckpt_.meta = {{"kind", "filter"}};
  return m;
}

FilterModel FilterModel::from_checkpoint(nn::Checkpoint ckpt) {
  if (ckpt.meta.value("kind", "") != "filter") throw FormatError("checkpoint is not a filter model");
  ckpt.net("filter");
  FilterModel m;
  m.ckpt_ = std::move(ckpt);
  return m;
}

FilterModel FilterModel::load(const std::string& path) {
  return from_checkpoint(nn::load_checkpoint(path));
}

void FilterModel::save(const std::string& path) { nn::save_checkpoint(ckpt_, path); }

double predict_signature(const FilterModel& model, const SignatureImage& img) {
  const SignatureImage* one = &img;
  return nn::sigmoid(logits(model.net(), std::span(&one, 1)).at(0));
}

std::vector<double> predict_batch(const FilterModel& model, std::span<const SignatureImage> imgs,
                                  int batch) {
  std::vector<double> out;
  out.reserve(imgs.size());
  const std::size_t step = static_cast<std::size_t>(std::max(1, batch));
  for (std::size_t i = 0; i < imgs.size(); i += step) {
    std::vector<const SignatureImage*> chunk;
    for (std::size_t j = i; j < std::min(imgs.size(), i + step); ++j) chunk.push_back(&imgs[j]);
    for (float z : logits(model.net(), chunk)) out.push_back(nn::sigmoid(z));
  }
  return out;
}

std::vector<CandidateRegion> filter_candidates(const FilterModel& model,
                                               std::vector<CandidateRegion> candidates,
                                               double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw InvalidInput("threshold outside [0,1]");
  std::vector<SignatureImage> crops;
  crops.reserve(candidates.size());
  for (const auto& c : candidates) crops.push_back(c.crop);
  const auto scores = predict_batch(model, crops);
  std::vector<CandidateRegion> kept;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (scores[i] > threshold) kept.push_back(std::move(candidates[i]));
  }
  return kept;
}

// ----------------------------------------------------------- augmentation

AugmentParams draw_augment_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> keep(0.8, 1.0);
  const int min_side = static_cast<int>(std::ceil(0.8 * kCanvasSize));
  const int w = std::clamp(static_cast<int>(std::ceil(keep(rng) * kCanvasSize)), min_side, kCanvasSize);
  const int h = std::clamp(static_cast<int>(std::ceil(keep(rng) * kCanvasSize)), min_side, kCanvasSize);
  const int x0 = std::uniform_int_distribution<int>(0, kCanvasSize - w)(rng);
  const int y0 = std::uniform_int_distribution<int>(0, kCanvasSize - h)(rng);
  AugmentParams p;
  p.crop = BBox{x0, y0, x0 + w - 1, y0 + h - 1};
  p.angle_deg = std::uniform_real_distribution<double>(-10.0, 10.0)(rng);
  return p;
}

GrayGrid rotate_grid(const GrayGrid& src, double angle_deg) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(a);
  const double sn = std::sin(a);
  const double cx = (src.width() - 1) / 2.0;
  const double cy = (src.height() - 1) / 2.0;
  auto at = [&](int x, int y) { return src.contains(x, y) ? src(x, y) : 1.0F; };
  GrayGrid out(src.width(), src.height(), 1.0F);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      // Inverse map: y axis points down, so counter-clockwise on screen
      // flips the sign of the sine terms.
      const double dx = x - cx;
      const double dy = y - cy;
      const double sx = cx + cs * dx - sn * dy;
      const double sy = cy + sn * dx + cs * dy;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const float fx = static_cast<float>(sx - x0);
      const float fy = static_cast<float>(sy - y0);
      const float top = std::lerp(at(x0, y0), at(x0 + 1, y0), fx);
      const float bottom = std::lerp(at(x0, y0 + 1), at(x0 + 1, y0 + 1), fx);
      out(x, y) = std::clamp(std::lerp(top, bottom, fy), 0.0F, 1.0F);
    }
  }
  return out;
}

SignatureImage apply_augment(const SignatureImage& img, const AugmentParams& params) {
  img.validate();
  SignatureImage out = normalize_to_canvas(crop_grid(img.pixels, params.crop), img.provenance);
  out.pixels = rotate_grid(out.pixels, params.angle_deg);
  out.state = img.state;
  return out;
}

SignatureImage augment(const SignatureImage& img, std::uint64_t seed) {
  return apply_augment(img, draw_augment_params(seed));
}

// ---------------------------------------------------------------- loading

LabeledRegionSet load_labeled_directory(const std::filesystem::path& root, int val_every) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw SourceError("labeled directory not found: " + root.string());
  LabeledRegionSet set;
  for (const auto& [sub, label] : {std::pair{"positive", 1}, std::pair{"negative", 0}}) {
    const fs::path dir = root / sub;
    if (!fs::is_directory(dir)) continue;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    int index = 0;
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
      LabeledImage item;
      item.image = normalize_to_canvas(g, Provenance{fs::relative(f, root).string(), 0, {}});
      item.label = label;
      item.split = (val_every > 0 && index % val_every == val_every - 1) ? Split::kVal : Split::kTrain;
      set.items.push_back(std::move(item));
      ++index;
    }
  }
  return set;
}

// --------------------------------------------------------------- training

FilterTrainResult train_filter(const LabeledRegionSet& data, const FilterTrainOptions& options) {
  std::vector<const LabeledImage*> train;
  std::vector<const LabeledImage*> val;
  for (const auto& item : data.items) {
    if (item.label != 0 && item.label != 1) throw DataError("labels must be 0 or 1");
    (item.split == Split::kTrain ? train : val).push_back(&item);
  }
  if (train.empty()) throw DataError("training split is empty");
  const bool has_pos = std::any_of(train.begin(), train.end(), [](auto* i) { return i->label == 1; });
  const bool has_neg = std::any_of(train.begin(), train.end(), [](auto* i) { return i->label == 0; });
  if (!has_pos || !has_neg) throw DataError("training split must contain both classes");
  if (options.epochs < 0) throw InvalidInput("epochs must be non-negative");

  FilterTrainResult result{FilterModel::create(options.arch, options.seed), {}};
  nn::Sequential& net = result.model.net();
  nn::Adam opt(net.params(), {.lr = options.learning_rate, .beta1 = 0.9F, .beta2 = 0.999F});
  std::mt19937_64 order_rng(mix_seed(options.seed, 1));

  auto accuracy = [&](const std::vector<const LabeledImage*>& items) {
    std::vector<SignatureImage> imgs;
    for (auto* i : items) imgs.push_back(i->image);
    const auto scores = predict_batch(result.model, imgs);
    int correct = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
      correct += ((scores[i] > 0.5) == (items[i]->label == 1)) ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(items.size());
  };

  const std::size_t batch = static_cast<std::size_t>(std::max(1, options.batch_size));
  std::vector<std::size_t> order(train.size());
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<SignatureImage> imgs;
      std::vector<float> targets;
      for (std::size_t k = start; k < end; ++k) {
        const LabeledImage& item = *train[order[k]];
        const std::uint64_t s = mix_seed(options.seed, (static_cast<std::uint64_t>(epoch) << 32) | order[k]);
        imgs.push_back(options.augment ? augment(item.image, s) : item.image);
        targets.push_back(static_cast<float>(item.label));
      }
      std::vector<const SignatureImage*> ptrs;
      for (const auto& im : imgs) ptrs.push_back(&im);
      opt.zero_grad();
      nn::Saved saved;
      const nn::Tensor z = net.forward(nn::batch_from_images(ptrs), &saved);
      const auto loss = nn::bce_with_logits(z, targets);
      net.backward(loss.grad, saved);
      opt.step();
      loss_sum += loss.value * static_cast<double>(end - start);
    }
    EpochStats st;
    st.epoch = epoch;
    st.loss = loss_sum / static_cast<double>(order.size());
    st.train_accuracy = accuracy(train);
    if (!val.empty()) st.val_accuracy = accuracy(val);
    spdlog::debug("filter epoch {} loss {:.4f} train acc {:.3f}", epoch, st.loss, st.train_accuracy);
    result.history.push_back(st);
    if (st.train_accuracy >= options.stop_at_train_accuracy) break;
  }
  result.model.checkpoint().meta["epochs_run"] = result.history.size();
  return result;
}

}  // namespace signet::filter
