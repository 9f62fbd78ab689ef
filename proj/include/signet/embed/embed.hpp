#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "signet/core/types.hpp"
#include "signet/nn/checkpoint.hpp"

namespace signet::embed {

/// Eight 3x3 conv layers (the first 5x5 stride 2) in pairs between 2x2
/// pools, then a linear 4096-d projection. `channels` lists the four pair widths.
struct EncoderArch {
  std::vector<int> channels{8, 16, 32, 64};
};

class EncoderModel {
 public:
  static EncoderModel create(const EncoderArch& arch, std::uint64_t seed);
  static EncoderModel load(const std::string& path);
  static EncoderModel from_checkpoint(nn::Checkpoint ckpt);
  void save(const std::string& path);

  /// True only for encoders initialized from externally pretrained weights.
  bool pretrained() const { return ckpt_.meta.value("pretrained", false); }

  nn::Sequential& net() { return ckpt_.net("encoder"); }
  const nn::Sequential& net() const { return ckpt_.net("encoder"); }
  nn::Checkpoint& checkpoint() noexcept { return ckpt_; }

 private:
  nn::Checkpoint ckpt_;
};

Embedding embed(const EncoderModel& enc, const SignatureImage& img);
/// Embeddings in input order; ids are format_signature_id of each provenance.
std::vector<Embedding> embed_batch(const EncoderModel& enc, std::span<const SignatureImage> imgs,
                                   int batch = 16);

/// cos(a, b); throws DegenerateEmbedding if either vector is zero.
double cosine_similarity(std::span<const float> a, std::span<const float> b);
/// (1 + cos) / 2.
double match_probability(std::span<const float> a, std::span<const float> b);
double match_probability(const Embedding& a, const Embedding& b);

struct LabeledSignature {
  SignatureImage image;
  std::string author;
};

/// Index pair into a signature list, label 1 for same author.
struct PairRef {
  std::size_t first = 0;
  std::size_t second = 0;
  int label = 0;
  friend bool operator==(const PairRef&, const PairRef&) = default;
};

/// Every same-author pair (i < j) plus round(ratio_neg * positives)
/// cross-author pairs sampled without replacement (all of them if fewer exist).
std::vector<PairRef> candidate_pairs(std::span<const std::string> authors, double ratio_neg,
                                     std::uint64_t seed);

struct PairDataset {
  std::vector<PairExample> train;
  std::vector<PairExample> val;
  std::set<std::string> train_authors;
  std::set<std::string> val_authors;
};

/// Splits authors (not pairs) into TRAIN/VAL, then pairs within each side.
/// round(val_fraction * authors) go to VAL, keeping at least two in TRAIN.
PairDataset build_pairs(std::span<const LabeledSignature> labeled, double ratio_neg,
                        std::uint64_t seed, double val_fraction = 0.2);

/// Reads <root>/<author>/* images; the directory name is the author id.
std::vector<LabeledSignature> load_author_directory(const std::string& root);

struct SiameseEpoch {
  int epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> val_accuracy;
};

struct SiameseTrainOptions {
  int epochs = 100;
  std::uint64_t seed = 0;
  int batch_pairs = 16;
  float learning_rate = 3e-4F;
  double stop_at_train_accuracy = 2.0;
  EncoderArch arch;
};

struct SiameseTrainResult {
  EncoderModel encoder;
  std::vector<SiameseEpoch> history;
};

/// Pair accuracy at match probability 0.5.
double pair_accuracy(const EncoderModel& enc, std::span<const PairExample> pairs);

SiameseTrainResult train_siamese(const PairDataset& data, const SiameseTrainOptions& options);

}  // namespace signet::embed
