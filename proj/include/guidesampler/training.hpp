#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "guidesampler/denoiser.hpp"
#include "guidesampler/random.hpp"
#include "guidesampler/schedule.hpp"

namespace guidesampler {

enum class LossVariant { kFlowMatching, kMaskedLanguageModel, kAnyOrderAutoregressive };

LossVariant parse_loss_variant(const std::string& name);
std::string to_string(LossVariant v);

struct WeightedSample {
  TokenSequence sequence;
  double weight = 1.0;
};

/// Every sequence of a tabular distribution with positive mass.
std::vector<WeightedSample> support_samples(const TabularDistribution& p);

struct DenoiserTrainingOptions {
  std::size_t steps = 2000;
  double learning_rate = 0.1;
  std::size_t batch_size = 32;
  InterpolationSchedule schedule = InterpolationSchedule::uniform();
};

struct TrainedDenoiser {
  ParametricDenoiser model;
  /// Exponential moving average of the mini-batch loss.
  double final_loss;
};

/// Mini-batch SGD on the parametric denoiser.
///  - flow matching: t ~ U[0,1], mask with probability 1 - kappa(t), masked cross-entropy;
///  - masked LM: masking proportion r ~ U[0,1], same cross-entropy, no clock;
///  - any-order AR: uniform order, summed next-position cross-entropies.
/// Throws TrainingError on a non-finite loss.
TrainedDenoiser train_denoiser(LossVariant variant, std::span<const WeightedSample> data,
                               const DenoiserTrainingOptions& options, RandomSource& rng);

}  // namespace guidesampler
