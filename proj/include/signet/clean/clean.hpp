#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "signet/core/types.hpp"
#include "signet/nn/checkpoint.hpp"

namespace signet::clean {

struct CleanerArch {
  int ngf = 8;              // generator base width
  int ndf = 8;              // discriminator base width
  int residual_blocks = 6;
  float output_gain = 0.1F; // scale of the generators' last conv at init
};

/// G: raw -> clean, F: clean -> raw, and one scalar critic per domain.
class CleanerModel {
 public:
  static CleanerModel create(const CleanerArch& arch, std::uint64_t seed);
  static CleanerModel load(const std::string& path);
  static CleanerModel from_checkpoint(nn::Checkpoint ckpt);
  void save(const std::string& path);

  nn::Sequential& G() { return ckpt_.net("G"); }
  nn::Sequential& F() { return ckpt_.net("F"); }
  nn::Sequential& DX() { return ckpt_.net("DX"); }
  nn::Sequential& DY() { return ckpt_.net("DY"); }
  const nn::Sequential& G() const { return ckpt_.net("G"); }
  const nn::Sequential& F() const { return ckpt_.net("F"); }
  const nn::Sequential& DX() const { return ckpt_.net("DX"); }
  const nn::Sequential& DY() const { return ckpt_.net("DY"); }
  nn::Checkpoint& checkpoint() noexcept { return ckpt_; }

 private:
  nn::Checkpoint ckpt_;
};

using ImageMap = std::function<nn::Tensor(const nn::Tensor&)>;

/// How each image's L1 reconstruction error is reduced over its pixels.
enum class PixelReduction {
  kSum,   // ||a - b||_1
  kMean,  // ||a - b||_1 / pixels
};

/// E_x ||F(G(x)) - x||_1 + E_y ||G(F(y)) - y||_1 with expectations taken as
/// batch means. Any map whose output shape differs from its round-trip
/// target raises InvalidInput.
double cycle_loss(const ImageMap& G, const ImageMap& F, const nn::Tensor& batch_x,
                  const nn::Tensor& batch_y, PixelReduction reduction = PixelReduction::kSum);

/// The same quantity for the model's generators on canvas images.
double cycle_loss(const CleanerModel& model, std::span<const SignatureImage> xs,
                  std::span<const SignatureImage> ys, PixelReduction reduction = PixelReduction::kSum);

/// G applied to a RAW canvas; provenance is kept and the state becomes CLEANED.
SignatureImage clean(const CleanerModel& model, const SignatureImage& img);
std::vector<SignatureImage> clean_batch(const CleanerModel& model, std::span<const SignatureImage> imgs,
                                        int batch = 4);

struct CleanTrainingSet {
  std::vector<SignatureImage> unpaired_x;  // raw crops
  std::vector<SignatureImage> unpaired_y;  // isolated signatures
  std::vector<std::pair<SignatureImage, SignatureImage>> paired;  // (raw, cleaned by hand)
};

/// Reads <root>/raw, <root>/clean and, when present, <root>/paired/raw plus
/// <root>/paired/clean matched by file name.
CleanTrainingSet load_clean_directory(const std::string& root);

struct CleanEpoch {
  int epoch = 0;
  double generator = 0.0;      // adversarial part of the generator objective
  double discriminator = 0.0;
  double cycle = 0.0;          // per-pixel-mean cycle term, before lambda
  double paired = 0.0;         // per-pixel-mean paired L1, before lambda
};

struct CleanerTrainOptions {
  int epochs = 200;
  std::uint64_t seed = 0;
  double lambda_cyc = 10.0;
  double lambda_pair = 5.0;
  float learning_rate = 2e-4F;
  /// The rate stays constant for this fraction of the epochs, then decays
  /// linearly towards zero; 1 keeps it constant throughout.
  double decay_start = 0.5;
  CleanerArch arch;
};

struct CleanerTrainResult {
  CleanerModel model;
  std::vector<CleanEpoch> history;
};

/// One epoch visits every unpaired raw image once, each step drawing a
/// clean image and, if any exist, a paired example.
CleanerTrainResult train_cleaner(const CleanTrainingSet& data, const CleanerTrainOptions& options);

}  // namespace signet::clean
