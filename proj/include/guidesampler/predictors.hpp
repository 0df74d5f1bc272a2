#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "guidesampler/denoiser.hpp"
#include "guidesampler/random.hpp"
#include "guidesampler/sequence.hpp"
#include "guidesampler/tabular.hpp"

namespace guidesampler {

/// Floor applied to every time-predictor likelihood before ratios are formed.
inline constexpr double kLikelihoodFloor = 1e-12;

double clamp_likelihood(double p);

/// p(y | x1) on clean sequences.
class CleanPredictor {
 public:
  CleanPredictor(int length, int alphabet_size, std::function<double(const TokenSequence&)> fn);

  static CleanPredictor constant(int length, int alphabet_size, double value);
  /// Values in encode_index order.
  static CleanPredictor tabulated(int length, int alphabet_size, std::vector<double> values);

  int length() const noexcept { return length_; }
  int alphabet_size() const noexcept { return alphabet_size_; }
  /// Throws DomainError if the wrapped function leaves [0, 1].
  double operator()(const TokenSequence& x) const;
  std::vector<double> tabulate() const;

 private:
  int length_;
  int alphabet_size_;
  std::function<double(const TokenSequence&)> fn_;
};

/// d log p(y | x) / d x_{d,c} at the one-hot encoding of an input; D x (S+1).
class GradientSurface {
 public:
  GradientSurface(int length, int alphabet_size);

  int length() const noexcept { return length_; }
  int alphabet_size() const noexcept { return alphabet_size_; }
  double& operator()(int pos, Token c) { return values_[index(pos, c)]; }
  double operator()(int pos, Token c) const { return values_[index(pos, c)]; }
  GradientSurface& operator+=(const GradientSurface& other);

  /// First-order estimate of log p(y | x with pos := s) - log p(y | x).
  double log_ratio(const MaskedSequence& x, int pos, Token s) const {
    return (*this)(pos, s) - (*this)(pos, x[pos]);
  }

 private:
  std::size_t index(int pos, Token c) const {
    return static_cast<std::size_t>(pos) * (alphabet_size_ + 1) + static_cast<std::size_t>(c);
  }
  int length_;
  int alphabet_size_;
  std::vector<double> values_;
};

/// p(y | x_t) on partially masked inputs.
class TimePredictor {
 public:
  virtual ~TimePredictor() = default;

  virtual int length() const = 0;
  virtual int alphabet_size() const = 0;
  /// Clamped to [kLikelihoodFloor, 1].
  virtual double likelihood(const MaskedSequence& xt) const = 0;
  virtual bool has_gradient() const { return false; }
  /// Throws CapabilityError unless has_gradient().
  virtual GradientSurface gradient_surface(const MaskedSequence& xt) const;

 protected:
  void check_input(const MaskedSequence& xt) const;
};

using TimePredictorPtr = std::shared_ptr<const TimePredictor>;

/// E_{x1 ~ p(x1 | xt)} [clean(x1)], computed by enumeration.
class ExactMarginalPredictor final : public TimePredictor {
 public:
  ExactMarginalPredictor(CleanPredictor clean, std::shared_ptr<const TabularDistribution> p);

  int length() const override { return p_->length(); }
  int alphabet_size() const override { return p_->alphabet_size(); }
  double likelihood(const MaskedSequence& xt) const override;
  /// Unclamped expectation; throws UnsupportedContext.
  double expectation(const MaskedSequence& xt) const;

 private:
  std::vector<double> clean_values_;
  std::shared_ptr<const TabularDistribution> p_;
  std::vector<double> table_;  // NaN marks unsupported contexts
};

std::shared_ptr<ExactMarginalPredictor> exact_marginal_predictor(
    const CleanPredictor& clean, std::shared_ptr<const TabularDistribution> p);

/// Monte-Carlo expectation of `clean` over completions drawn from the product
/// of the denoiser's per-position marginals at xt.
///
/// likelihood(xt) is a deterministic function of xt: its draws come from
/// RandomSource(seed, encode_masked_index(xt)).
class ProductOfMarginalsPredictor final : public TimePredictor {
 public:
  ProductOfMarginalsPredictor(CleanPredictor clean, std::shared_ptr<const Denoiser> denoiser,
                              std::size_t n_samples, std::uint64_t seed);

  int length() const override { return clean_.length(); }
  int alphabet_size() const override { return clean_.alphabet_size(); }
  double likelihood(const MaskedSequence& xt) const override;
  double likelihood(const MaskedSequence& xt, RandomSource& rng) const;
  /// Exact product-of-marginals expectation by enumeration (small D only).
  double exact_expectation(const MaskedSequence& xt) const;

 private:
  CleanPredictor clean_;
  std::shared_ptr<const Denoiser> denoiser_;
  std::size_t n_samples_;
  std::uint64_t seed_;
};

/// Potts-style classifier over the mask-extended one-hot encoding:
///   z(x) = b + sum_d h[d][x_d] + sum_{d<e} J[d][e][x_d][x_e]
/// with a logistic link p = sigmoid(z) or a log-linear link p = exp(min(z, 0)).
/// Under the log-linear link with no pairwise terms, log p is affine in the
/// one-hot encoding wherever z <= 0.
class PottsClassifier final : public TimePredictor {
 public:
  enum class Link { kLogistic, kLogLinear };

  PottsClassifier(int length, int alphabet_size, Link link = Link::kLogistic,
                  bool pairwise = true);

  int length() const override { return length_; }
  int alphabet_size() const override { return alphabet_size_; }
  double likelihood(const MaskedSequence& xt) const override;
  bool has_gradient() const override { return true; }
  GradientSurface gradient_surface(const MaskedSequence& xt) const override;

  double logit(const MaskedSequence& xt) const;
  /// log p(y | x) at a relaxed (real-valued) D x (S+1) input, unclamped.
  double log_likelihood_relaxed(std::span<const double> x) const;

  Link link() const noexcept { return link_; }
  bool has_pairwise() const noexcept { return pairwise_enabled_; }
  double& bias() noexcept { return bias_; }
  double bias() const noexcept { return bias_; }
  double& field(int pos, Token c) { return fields_[field_index(pos, c)]; }
  double field(int pos, Token c) const { return fields_[field_index(pos, c)]; }
  double& coupling(int d, Token a, int e, Token b);
  double coupling(int d, Token a, int e, Token b) const;

  std::span<double> field_params() noexcept { return fields_; }
  std::span<double> coupling_params() noexcept { return couplings_; }
  std::size_t field_index(int pos, Token c) const {
    return static_cast<std::size_t>(pos) * (alphabet_size_ + 1) + static_cast<std::size_t>(c);
  }
  /// Offset of the (S+1)^2 block for d < e.
  std::size_t pair_block(int d, int e) const;

  nlohmann::json to_json() const;
  static PottsClassifier from_json(const nlohmann::json& j);

 private:
  int length_;
  int alphabet_size_;
  Link link_;
  bool pairwise_enabled_;
  double bias_ = 0.0;
  std::vector<double> fields_;
  std::vector<double> couplings_;
};

struct LabeledSequence {
  TokenSequence sequence;
  double label = 0.0;
};

struct ClassifierTrainingOptions {
  std::size_t epochs = 400;
  double learning_rate = 0.5;
  /// L2 weight on pairwise terms; single-site terms are unregularized.
  double pairwise_l2 = 10.0;
  bool pairwise = true;
  /// Re-noised copies of each example per epoch.
  std::size_t copies_per_epoch = 4;
  /// Optional two-stage protocol: fit clean inputs first, then freeze the
  /// clean-symbol parameters and fit the mask parameters on re-noised data.
  bool two_stage = false;
  InterpolationSchedule schedule = InterpolationSchedule::uniform();
};

/// Logistic noisy classifier trained on re-noised copies of labeled data
/// (labels >= 0.5 are positives). Throws DomainError on single-class data.
PottsClassifier train_noisy_classifier(std::span<const LabeledSequence> data,
                                       const ClassifierTrainingOptions& options,
                                       RandomSource& rng);

/// 1 - Phi((y* - mu) / sigma). Throws DomainError when sigma <= 0.
double threshold_likelihood(double mu, double sigma, double y_star);

/// p(y >= y* | xt) from an ensemble's mean and spread.
class ThresholdPredictor final : public TimePredictor {
 public:
  using Moment = std::function<double(const MaskedSequence&)>;
  ThresholdPredictor(int length, int alphabet_size, Moment mu, Moment sigma, double y_star);

  int length() const override { return length_; }
  int alphabet_size() const override { return alphabet_size_; }
  double likelihood(const MaskedSequence& xt) const override;

 private:
  int length_;
  int alphabet_size_;
  Moment mu_;
  Moment sigma_;
  double y_star_;
};

/// Conditionally independent product of several predictors.
class ProductPredictor final : public TimePredictor {
 public:
  explicit ProductPredictor(std::vector<TimePredictorPtr> parts);

  int length() const override { return parts_.front()->length(); }
  int alphabet_size() const override { return parts_.front()->alphabet_size(); }
  double likelihood(const MaskedSequence& xt) const override;
  bool has_gradient() const override;
  GradientSurface gradient_surface(const MaskedSequence& xt) const override;

 private:
  std::vector<TimePredictorPtr> parts_;
};

std::vector<LabeledSequence> load_labeled_csv(const std::string& path, int alphabet_size);

}  // namespace guidesampler
