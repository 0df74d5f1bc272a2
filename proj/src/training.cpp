#include "guidesampler/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "guidesampler/errors.hpp"

namespace guidesampler {

LossVariant parse_loss_variant(const std::string& name) {
  if (name == "fm" || name == "FM") return LossVariant::kFlowMatching;
  if (name == "mlm" || name == "MLM") return LossVariant::kMaskedLanguageModel;
  if (name == "aoarm" || name == "AOARM") return LossVariant::kAnyOrderAutoregressive;
  throw DomainError("unknown loss variant: " + name);
}

std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::kFlowMatching: return "fm";
    case LossVariant::kMaskedLanguageModel: return "mlm";
    case LossVariant::kAnyOrderAutoregressive: return "aoarm";
  }
  return "?";
}

std::vector<WeightedSample> support_samples(const TabularDistribution& p) {
  std::vector<WeightedSample> out;
  const auto w = p.weights();
  for (std::uint64_t i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0) out.push_back({decode_index(i, p.length(), p.alphabet_size()), w[i]});
  }
  return out;
}

namespace {

class GradientAccumulator {
 public:
  explicit GradientAccumulator(const ParametricDenoiser& model)
      : model_(model),
        single_(model.single_site().size(), 0.0),
        pair_(model.pairwise().size(), 0.0),
        probs_(static_cast<std::size_t>(model.alphabet_size())) {}

  // Adds the gradient of -log p(target | xt) at position pos; returns the loss term.
  double add(const MaskedSequence& xt, int pos, Token target) {
    model_.position_posterior(xt, pos, probs_);
    const double p_target = probs_[static_cast<std::size_t>(target)];
    for (Token s = 0; s < model_.alphabet_size(); ++s) {
      const double g = probs_[static_cast<std::size_t>(s)] - (s == target ? 1.0 : 0.0);
      single_[model_.single_index(pos, s)] += g;
      for (int j = 0; j < model_.length(); ++j) {
        if (j == pos) continue;
        pair_[model_.pair_index(pos, s, j, xt[j])] += g;
      }
    }
    return -std::log(p_target);
  }

  void apply(ParametricDenoiser& model, double step) {
    auto single = model.single_site();
    auto pair = model.pairwise();
    for (std::size_t k = 0; k < single.size(); ++k) single[k] -= step * single_[k];
    for (std::size_t k = 0; k < pair.size(); ++k) pair[k] -= step * pair_[k];
    std::fill(single_.begin(), single_.end(), 0.0);
    std::fill(pair_.begin(), pair_.end(), 0.0);
  }

 private:
  const ParametricDenoiser& model_;
  std::vector<double> single_;
  std::vector<double> pair_;
  std::vector<double> probs_;
};

}  // namespace

TrainedDenoiser train_denoiser(LossVariant variant, std::span<const WeightedSample> data,
                               const DenoiserTrainingOptions& options, RandomSource& rng) {
  if (data.empty()) throw DomainError("train_denoiser: empty training set");
  if (options.batch_size == 0) throw DomainError("train_denoiser: batch size must be positive");
  const int length = data.front().sequence.length();
  const int s = data.front().sequence.alphabet_size();
  std::vector<double> sample_weights;
  for (const auto& d : data) {
    if (d.sequence.length() != length || d.sequence.alphabet_size() != s) {
      throw DomainError("train_denoiser: training sequences disagree on D or S");
    }
    sample_weights.push_back(d.weight);
  }

  ParametricDenoiser model(length, s);
  GradientAccumulator grad(model);
  std::vector<int> order(static_cast<std::size_t>(length));
  double running = 0.0;
  bool first = true;

  for (std::size_t step = 0; step < options.steps; ++step) {
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < options.batch_size; ++b) {
      const TokenSequence& x = data[rng.categorical(sample_weights)].sequence;
      switch (variant) {
        case LossVariant::kFlowMatching:
        case LossVariant::kMaskedLanguageModel: {
          MaskedSequence xt;
          if (variant == LossVariant::kFlowMatching) {
            xt = mask_forward(x, rng.uniform(), options.schedule, rng);
          } else {
            const double rate = rng.uniform();
            xt = MaskedSequence(x);
            for (int i = 0; i < length; ++i) {
              if (rng.uniform() < rate) xt.set(i, xt.mask());
            }
          }
          for (int i = 0; i < length; ++i) {
            if (xt.is_masked(i)) batch_loss += grad.add(xt, i, x[i]);
          }
          break;
        }
        case LossVariant::kAnyOrderAutoregressive: {
          std::iota(order.begin(), order.end(), 0);
          for (std::size_t k = order.size(); k > 1; --k) {
            std::swap(order[k - 1], order[rng.uniform_index(k)]);
          }
          MaskedSequence xt = MaskedSequence::fully_masked(length, s);
          for (int pos : order) {
            batch_loss += grad.add(xt, pos, x[pos]);
            xt.set(pos, x[pos]);
          }
          break;
        }
      }
    }
    batch_loss /= static_cast<double>(options.batch_size);
    if (!std::isfinite(batch_loss)) {
      throw TrainingError("train_denoiser: non-finite loss at step " + std::to_string(step), step);
    }
    running = first ? batch_loss : 0.98 * running + 0.02 * batch_loss;
    first = false;
    grad.apply(model, options.learning_rate / static_cast<double>(options.batch_size));
  }
  return {std::move(model), running};
}

}  // namespace guidesampler
