#include "signet/embed/embed.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "signet/core/canvas.hpp"
#include "signet/core/errors.hpp"
#include "signet/nn/optim.hpp"
#include "signet/util/digest.hpp"
#include "signet/util/image_io.hpp"
#include "signet/util/seed.hpp"

namespace signet::embed {

namespace {

constexpr double kProbEps = 1e-6;

std::unique_ptr<nn::Sequential> build_net(const EncoderArch& arch) {
  if (arch.channels.size() != 4) throw InvalidInput("encoder needs four channel widths");
  auto net = std::make_unique<nn::Sequential>();
  net->emplace<nn::Invert>();
  int in = 1;
  for (std::size_t stage = 0; stage < arch.channels.size(); ++stage) {
    const int ch = arch.channels[stage];
    if (stage == 0) {
      net->emplace<nn::Conv2d>(in, ch, 5, 2);
    } else {
      net->emplace<nn::Conv2d>(in, ch, 3);
    }
    net->emplace<nn::ReLU>();
    net->emplace<nn::Conv2d>(ch, ch, 3);
    net->emplace<nn::ReLU>();
    net->emplace<nn::MaxPool2>();
    in = ch;
  }
  // 256 -> 128 (stride) -> 8 after four pools.
  const int side = kCanvasSize / 2 / 16;
  // Centering each channel keeps untrained embeddings of unrelated images
  // near-orthogonal; raw ReLU features share a large common component.
  net->emplace<nn::InstanceNorm>(in);
  net->emplace<nn::Flatten>();
  net->emplace<nn::Dense>(in * side * side, kEmbeddingDim);
  return net;
}

std::vector<float> norms_and_dots(const float* a, const float* b, std::size_t n) {
  double aa = 0.0;
  double bb = 0.0;
  double ab = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
    ab += static_cast<double>(a[i]) * b[i];
  }
  return {static_cast<float>(std::sqrt(aa)), static_cast<float>(std::sqrt(bb)), static_cast<float>(ab)};
}

nn::Tensor forward_images(const nn::Sequential& net, std::span<const SignatureImage* const> imgs,
                          nn::Saved* saved) {
  return net.forward(nn::batch_from_images(imgs), saved);
}

std::uint64_t image_key(const SignatureImage& img) {
  const auto cells = img.pixels.cells();
  Digest d;
  d.update(std::span(reinterpret_cast<const std::uint8_t*>(cells.data()), cells.size_bytes()));
  return d.value();
}

// Distinct images referenced by a pair list, so each is encoded once per step.
struct PairImages {
  std::vector<const SignatureImage*> images;
  std::vector<std::pair<std::size_t, std::size_t>> index;

  explicit PairImages(std::span<const PairExample* const> pairs) {
    std::unordered_multimap<std::uint64_t, std::size_t> seen;
    auto intern = [&](const SignatureImage& img) {
      const auto key = image_key(img);
      auto [lo, hi] = seen.equal_range(key);
      for (auto it = lo; it != hi; ++it) {
        if (images[it->second]->pixels == img.pixels) return it->second;
      }
      images.push_back(&img);
      seen.emplace(key, images.size() - 1);
      return images.size() - 1;
    };
    for (const PairExample* p : pairs) index.emplace_back(intern(p->first), intern(p->second));
  }
};

}  // namespace

EncoderModel EncoderModel::create(const EncoderArch& arch, std::uint64_t seed) {
  EncoderModel m;
  auto net = build_net(arch);
  nn::Rng rng(seed);
  net->init(rng);
  m.ckpt_.nets["encoder"] = std::move(net);
  m.ckpt_.meta = {{"kind", "encoder"}, {"pretrained", false}, {"embedding_dim", kEmbeddingDim}};
  return m;
}

EncoderModel EncoderModel::from_checkpoint(nn::Checkpoint ckpt) {
  if (ckpt.meta.value("kind", "") != "encoder") throw FormatError("checkpoint is not an encoder");
  ckpt.net("encoder");
  EncoderModel m;
  m.ckpt_ = std::move(ckpt);
  return m;
}

EncoderModel EncoderModel::load(const std::string& path) {
  return from_checkpoint(nn::load_checkpoint(path));
}

void EncoderModel::save(const std::string& path) { nn::save_checkpoint(ckpt_, path); }

std::vector<Embedding> embed_batch(const EncoderModel& enc, std::span<const SignatureImage> imgs,
                                   int batch) {
  std::vector<Embedding> out;
  out.reserve(imgs.size());
  const std::size_t step = static_cast<std::size_t>(std::max(1, batch));
  for (std::size_t i = 0; i < imgs.size(); i += step) {
    std::vector<const SignatureImage*> chunk;
    for (std::size_t j = i; j < std::min(imgs.size(), i + step); ++j) chunk.push_back(&imgs[j]);
    const nn::Tensor y = forward_images(enc.net(), chunk, nullptr);
    if (y.sample_size() != static_cast<std::size_t>(kEmbeddingDim)) {
      throw FormatError("encoder emits " + y.shape_string() + ", expected 4096 features");
    }
    for (std::size_t k = 0; k < chunk.size(); ++k) {
      const float* row = y.sample(static_cast<int>(k));
      out.emplace_back(Vector(row, row + kEmbeddingDim), format_signature_id(chunk[k]->provenance));
    }
  }
  return out;
}

Embedding embed(const EncoderModel& enc, const SignatureImage& img) {
  return std::move(embed_batch(enc, std::span(&img, 1)).front());
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw InvalidInput("cosine of vectors with different lengths");
  const auto v = norms_and_dots(a.data(), b.data(), a.size());
  if (v[0] == 0.0F || v[1] == 0.0F) throw DegenerateEmbedding("cosine of a zero vector is undefined");
  return std::clamp(static_cast<double>(v[2]) / (static_cast<double>(v[0]) * v[1]), -1.0, 1.0);
}

double match_probability(std::span<const float> a, std::span<const float> b) {
  return (1.0 + cosine_similarity(a, b)) / 2.0;
}

double match_probability(const Embedding& a, const Embedding& b) {
  return match_probability(std::span<const float>(a.values()), std::span<const float>(b.values()));
}

// ------------------------------------------------------------------ pairs

std::vector<PairRef> candidate_pairs(std::span<const std::string> authors, double ratio_neg,
                                     std::uint64_t seed) {
  if (!(ratio_neg >= 0.0)) throw InvalidInput("ratio_neg must be non-negative");
  std::vector<PairRef> pos;
  std::vector<PairRef> neg;
  for (std::size_t i = 0; i < authors.size(); ++i) {
    for (std::size_t j = i + 1; j < authors.size(); ++j) {
      (authors[i] == authors[j] ? pos : neg).push_back({i, j, authors[i] == authors[j] ? 1 : 0});
    }
  }
  const auto want = static_cast<std::size_t>(std::llround(ratio_neg * static_cast<double>(pos.size())));
  std::mt19937_64 rng(mix_seed(seed, 0x9a1));
  if (want < neg.size()) {
    std::shuffle(neg.begin(), neg.end(), rng);
    neg.resize(want);
    std::sort(neg.begin(), neg.end(), [](const PairRef& x, const PairRef& y) {
      return std::tie(x.first, x.second) < std::tie(y.first, y.second);
    });
  }
  pos.insert(pos.end(), neg.begin(), neg.end());
  return pos;
}

PairDataset build_pairs(std::span<const LabeledSignature> labeled, double ratio_neg,
                        std::uint64_t seed, double val_fraction) {
  std::map<std::string, std::vector<std::size_t>> by_author;
  for (std::size_t i = 0; i < labeled.size(); ++i) by_author[labeled[i].author].push_back(i);
  if (by_author.size() < 2) throw DataError("pair building needs at least two authors");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw InvalidInput("val_fraction outside [0,1)");

  std::vector<std::string> authors;
  for (const auto& [a, _] : by_author) authors.push_back(a);
  std::mt19937_64 rng(mix_seed(seed, 0x5b1));
  std::shuffle(authors.begin(), authors.end(), rng);
  const auto total = static_cast<long long>(authors.size());
  const long long val_count =
      std::clamp<long long>(std::llround(val_fraction * static_cast<double>(total)), 0, total - 2);

  PairDataset out;
  for (long long i = 0; i < total; ++i) {
    (i < val_count ? out.val_authors : out.train_authors).insert(authors[static_cast<std::size_t>(i)]);
  }

  auto pairs_for = [&](const std::set<std::string>& side, std::uint64_t stream) {
    std::vector<std::size_t> items;
    for (const auto& a : side) {
      for (std::size_t i : by_author[a]) items.push_back(i);
    }
    std::vector<std::string> names;
    for (std::size_t i : items) names.push_back(labeled[i].author);
    std::vector<PairExample> pairs;
    for (const PairRef& p : candidate_pairs(names, ratio_neg, mix_seed(seed, stream))) {
      pairs.push_back({labeled[items[p.first]].image, labeled[items[p.second]].image, p.label});
    }
    return pairs;
  };
  out.train = pairs_for(out.train_authors, 1);
  out.val = pairs_for(out.val_authors, 2);
  if (std::none_of(out.train.begin(), out.train.end(), [](const PairExample& p) { return p.label == 1; })) {
    throw DataError("no author in TRAIN has two signatures");
  }
  return out;
}

std::vector<LabeledSignature> load_author_directory(const std::string& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw SourceError("author directory not found: " + root);
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<LabeledSignature> out;
  for (const auto& d : dirs) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(d)) {
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
      out.push_back({normalize_to_canvas(g, Provenance{fs::relative(f, root).string(), 0, {}}),
                     d.filename().string()});
    }
  }
  return out;
}

// --------------------------------------------------------------- training

double pair_accuracy(const EncoderModel& enc, std::span<const PairExample> pairs) {
  if (pairs.empty()) return 0.0;
  std::vector<const PairExample*> ptrs;
  for (const auto& p : pairs) ptrs.push_back(&p);
  const PairImages u(ptrs);
  std::vector<SignatureImage> imgs;
  for (const auto* im : u.images) imgs.push_back(*im);
  const auto emb = embed_batch(enc, imgs);
  int correct = 0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double p = match_probability(emb[u.index[k].first], emb[u.index[k].second]);
    correct += ((p > 0.5) == (pairs[k].label == 1)) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

SiameseTrainResult train_siamese(const PairDataset& data, const SiameseTrainOptions& options) {
  if (data.train.empty()) throw DataError("no training pairs");
  const bool has_pos = std::any_of(data.train.begin(), data.train.end(), [](auto& p) { return p.label == 1; });
  const bool has_neg = std::any_of(data.train.begin(), data.train.end(), [](auto& p) { return p.label == 0; });
  if (!has_pos || !has_neg) throw DataError("training pairs must contain both labels");

  SiameseTrainResult result{EncoderModel::create(options.arch, options.seed), {}};
  nn::Sequential& net = result.encoder.net();
  nn::Adam opt(net.params(), {.lr = options.learning_rate, .beta1 = 0.9F, .beta2 = 0.999F});
  std::mt19937_64 order_rng(mix_seed(options.seed, 7));
  std::vector<std::size_t> order(data.train.size());
  const std::size_t batch = static_cast<std::size_t>(std::max(1, options.batch_pairs));

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<const PairExample*> pairs;
      for (std::size_t k = start; k < end; ++k) pairs.push_back(&data.train[order[k]]);
      const PairImages u(pairs);

      opt.zero_grad();
      nn::Saved saved;
      const nn::Tensor e = forward_images(net, u.images, &saved);
      nn::Tensor grad(e.n(), e.c(), e.h(), e.w());
      const std::size_t d = e.sample_size();
      const double inv_n = 1.0 / static_cast<double>(pairs.size());
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto [ia, ib] = u.index[k];
        const float* a = e.sample(static_cast<int>(ia));
        const float* b = e.sample(static_cast<int>(ib));
        const auto v = norms_and_dots(a, b, d);
        const double na = std::max<double>(v[0], 1e-12);
        const double nb = std::max<double>(v[1], 1e-12);
        const double cos = std::clamp(v[2] / (na * nb), -1.0, 1.0);
        const double p = std::clamp((1.0 + cos) / 2.0, kProbEps, 1.0 - kProbEps);
        const double y = pairs[k]->label;
        loss_sum += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        // dL/dcos through p = (1 + cos) / 2.
        const double g = inv_n * 0.5 * (p - y) / (p * (1.0 - p));
        float* ga = grad.sample(static_cast<int>(ia));
        float* gb = grad.sample(static_cast<int>(ib));
        for (std::size_t i = 0; i < d; ++i) {
          ga[i] += static_cast<float>(g * (b[i] / (na * nb) - cos * a[i] / (na * na)));
          gb[i] += static_cast<float>(g * (a[i] / (na * nb) - cos * b[i] / (nb * nb)));
        }
      }
      net.backward(grad, saved);
      opt.step();
    }
    SiameseEpoch st;
    st.epoch = epoch;
    st.loss = loss_sum / static_cast<double>(order.size());
    st.train_accuracy = pair_accuracy(result.encoder, data.train);
    if (!data.val.empty()) st.val_accuracy = pair_accuracy(result.encoder, data.val);
    spdlog::debug("siamese epoch {} loss {:.4f} train acc {:.3f}", epoch, st.loss, st.train_accuracy);
    result.history.push_back(st);
    if (st.train_accuracy >= options.stop_at_train_accuracy) break;
  }
  result.encoder.checkpoint().meta["epochs_run"] = result.history.size();
  return result;
}

}  // namespace signet::embed
