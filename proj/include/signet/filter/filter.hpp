#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "signet/core/types.hpp"
#include "signet/nn/checkpoint.hpp"

namespace signet::filter {

struct FilterArch {
  std::vector<int> conv_channels{16, 32, 64, 64};
  int dense_units = 128;
};

/// Binary signature/non-signature classifier over 256x256 canvases. The
/// network emits a logit; scores are its sigmoid.
class FilterModel {
 public:
  static FilterModel create(const FilterArch& arch, std::uint64_t seed);
  static FilterModel load(const std::string& path);
  static FilterModel from_checkpoint(nn::Checkpoint ckpt);
  void save(const std::string& path);

  nn::Sequential& net() { return ckpt_.net("filter"); }
  const nn::Sequential& net() const { return ckpt_.net("filter"); }
  nn::Checkpoint& checkpoint() noexcept { return ckpt_; }

 private:
  nn::Checkpoint ckpt_;
};

double predict_signature(const FilterModel& model, const SignatureImage& img);
/// Scores in input order, evaluated in batches of at most `batch`.
std::vector<double> predict_batch(const FilterModel& model, std::span<const SignatureImage> imgs,
                                  int batch = 8);

/// Keeps candidates whose score is strictly above threshold, in input order.
std::vector<CandidateRegion> filter_candidates(const FilterModel& model,
                                               std::vector<CandidateRegion> candidates,
                                               double threshold);

/// One draw of the training-time geometric jitter.
struct AugmentParams {
  BBox crop;             // window on the 256x256 canvas
  double angle_deg = 0;  // counter-clockwise, about the canvas centre
};

AugmentParams draw_augment_params(std::uint64_t seed);
SignatureImage apply_augment(const SignatureImage& img, const AugmentParams& params);
SignatureImage augment(const SignatureImage& img, std::uint64_t seed);

/// Rotates a grid about its centre with bilinear sampling and white fill.
GrayGrid rotate_grid(const GrayGrid& src, double angle_deg);

enum class Split { kTrain, kVal };

struct LabeledImage {
  SignatureImage image;
  int label = 0;
  Split split = Split::kTrain;
};

struct LabeledRegionSet {
  std::vector<LabeledImage> items;
};

/// Reads <root>/positive/* and <root>/negative/* images (any size; each is
/// normalized to the canvas). Every `val_every`-th file per class, counted
/// in lexicographic order, goes to VAL; 0 keeps everything in TRAIN.
LabeledRegionSet load_labeled_directory(const std::filesystem::path& root, int val_every = 0);

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> val_accuracy;
};

struct FilterTrainOptions {
  int epochs = 200;
  std::uint64_t seed = 0;
  int batch_size = 10;
  float learning_rate = 1e-3F;
  bool augment = true;
  /// Stop once clean-TRAIN accuracy reaches this value; values above 1 never stop.
  double stop_at_train_accuracy = 2.0;
  FilterArch arch;
};

struct FilterTrainResult {
  FilterModel model;
  std::vector<EpochStats> history;
};

FilterTrainResult train_filter(const LabeledRegionSet& data, const FilterTrainOptions& options);

}  // namespace signet::filter
