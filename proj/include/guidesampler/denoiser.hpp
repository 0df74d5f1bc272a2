#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "guidesampler/sequence.hpp"
#include "guidesampler/tabular.hpp"

namespace guidesampler {

/// D x S table of clean-token probabilities p(x1^i | x_t). Rows at unmasked
/// positions are the one-hot of the observed token. No column for the mask.
class PerPositionPosterior {
 public:
  PerPositionPosterior(int length, int alphabet_size);

  int length() const noexcept { return length_; }
  int alphabet_size() const noexcept { return alphabet_size_; }
  std::span<double> row(int pos);
  std::span<const double> row(int pos) const;
  double operator()(int pos, Token s) const { return row(pos)[static_cast<std::size_t>(s)]; }

 private:
  int length_;
  int alphabet_size_;
  std::vector<double> probs_;
};

/// Clean-token posterior model. Implementations never see the clock:
/// under masking noise the posterior depends on x_t alone.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual int length() const = 0;
  virtual int alphabet_size() const = 0;

  /// Writes p(x1^pos = s | xt) for s in 0..S-1 into `out` (size S).
  virtual void position_posterior(const MaskedSequence& xt, int pos, std::span<double> out) const = 0;

  virtual PerPositionPosterior posterior(const MaskedSequence& xt) const;

 protected:
  void check_input(const MaskedSequence& xt) const;
};

/// Posterior by enumeration of a tabular distribution. For small state
/// spaces the full (S+1)^D table is precomputed at construction.
class ExactDenoiser final : public Denoiser {
 public:
  explicit ExactDenoiser(std::shared_ptr<const TabularDistribution> p);

  int length() const override { return p_->length(); }
  int alphabet_size() const override { return p_->alphabet_size(); }
  void position_posterior(const MaskedSequence& xt, int pos, std::span<double> out) const override;
  PerPositionPosterior posterior(const MaskedSequence& xt) const override;

  const TabularDistribution& distribution() const noexcept { return *p_; }
  bool is_tabulated() const noexcept { return !table_.empty(); }

 private:
  PerPositionPosterior compute(const MaskedSequence& xt) const;

  std::shared_ptr<const TabularDistribution> p_;
  // Flattened [masked index][pos][s]; NaN rows mark unsupported contexts.
  std::vector<double> table_;
};

/// Exact posterior of `p` at `xt`. Throws UnsupportedContext.
PerPositionPosterior exact_denoise(const TabularDistribution& p, const MaskedSequence& xt);

/// Temperature and wild-type bias applied to denoiser logits:
/// l'_{d,s} = (l_{d,s} + w [s == wt_d]) / temperature.
struct LogitModifier {
  double temperature = 1.0;
  double wildtype_weight = 0.0;
  std::optional<TokenSequence> wildtype;

  bool is_identity() const noexcept { return temperature == 1.0 && wildtype_weight == 0.0; }
  void validate() const;
  /// Modifies one position's logits in place.
  void apply(int pos, std::span<double> logits) const;
};

/// Row-major D x S logits with the modifier applied.
std::vector<double> apply_modifiers(std::span<const double> logits, int length, int alphabet_size,
                                    const LogitModifier& mod);

/// Wraps a denoiser, using log-probabilities as logits, applying a
/// LogitModifier and renormalizing. The identity modifier passes rows through untouched.
class ModifiedDenoiser final : public Denoiser {
 public:
  ModifiedDenoiser(std::shared_ptr<const Denoiser> base, LogitModifier mod);

  int length() const override { return base_->length(); }
  int alphabet_size() const override { return base_->alphabet_size(); }
  void position_posterior(const MaskedSequence& xt, int pos, std::span<double> out) const override;

 private:
  std::shared_ptr<const Denoiser> base_;
  LogitModifier mod_;
};

/// Trainable factorized denoiser. Logit for symbol s at masked position i:
///   h[i][s] + sum_{j != i} J[i][s][j][c_j]
/// where c_j in 0..S is the (mask-extended) token at position j.
class ParametricDenoiser final : public Denoiser {
 public:
  /// Zero parameters: uniform posteriors.
  ParametricDenoiser(int length, int alphabet_size);

  int length() const override { return length_; }
  int alphabet_size() const override { return alphabet_size_; }
  void position_posterior(const MaskedSequence& xt, int pos, std::span<double> out) const override;
  void logits(const MaskedSequence& xt, int pos, std::span<double> out) const;

  std::span<double> single_site() noexcept { return single_site_; }
  std::span<const double> single_site() const noexcept { return single_site_; }
  std::span<double> pairwise() noexcept { return pairwise_; }
  std::span<const double> pairwise() const noexcept { return pairwise_; }

  std::size_t single_index(int pos, Token s) const;
  std::size_t pair_index(int pos, Token s, int other, Token c) const;

  nlohmann::json to_json() const;
  static ParametricDenoiser from_json(const nlohmann::json& j);
  static ParametricDenoiser random(int length, int alphabet_size, double scale, RandomSource& rng);

 private:
  int length_;
  int alphabet_size_;
  std::vector<double> single_site_;
  std::vector<double> pairwise_;
};

/// In-place softmax.
void softmax(std::span<double> v);

}  // namespace guidesampler
