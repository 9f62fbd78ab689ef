#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "signet/clean/clean.hpp"
#include "signet/embed/embed.hpp"
#include "signet/filter/filter.hpp"
#include "signet/synth/synth.hpp"

namespace signet::synth {

/// Small models trained on generated data, enough to drive the pipeline on
/// generated documents in a few minutes of CPU time.
struct ToyModelOptions {
  std::uint64_t seed = 0;
  int filter_examples = 16;      // per class
  int filter_documents = 4;      // generated forms whose candidates join the set
  int filter_epochs = 40;
  int encoder_instances = 6;     // per author
  int encoder_epochs = 12;
  int cleaner_examples = 8;
  int cleaner_epochs = 2;
  clean::CleanerArch cleaner_arch{.ngf = 4, .ndf = 4, .residual_blocks = 2, .output_gain = 0.1F};
};

struct ToyModels {
  filter::FilterModel filter;
  clean::CleanerModel cleaner;
  embed::EncoderModel encoder;
};

/// `authors` are the writers the encoder learns to tell apart; extra
/// writers for the filter's positives are generated from the seed.
ToyModels train_toy_models(std::span<const AuthorStyle> authors, const ToyModelOptions& options);

struct ToyModelPaths {
  std::filesystem::path filter;
  std::filesystem::path cleaner;
  std::filesystem::path encoder;
};

ToyModelPaths save_toy_models(ToyModels& models, const std::filesystem::path& dir);

}  // namespace signet::synth
