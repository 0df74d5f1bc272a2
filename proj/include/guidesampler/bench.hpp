#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "guidesampler/predictors.hpp"
#include "guidesampler/random.hpp"
#include "guidesampler/sequence.hpp"
#include "guidesampler/tabular.hpp"

namespace guidesampler {

/// Largest S^D a landscape may enumerate.
inline constexpr std::uint64_t kMaxLandscapeStates = 65536;

struct LandscapeSpec {
  int length = 8;
  int alphabet_size = 4;
  /// Standard deviations of the planted Gibbs energies.
  double energy_single = 1.0;
  double energy_pair = 0.3;
  /// Standard deviations of the planted fitness terms.
  double fitness_single = 1.0;
  double fitness_pair = 0.3;
  /// 1: threshold on one fitness axis; 2: rectangle over two anticorrelated axes.
  int axes = 1;
  double axis_correlation = -0.5;
  /// The target is the top-fitness region holding at most this much p_data mass.
  double target_mass = 1e-3;
  std::uint64_t seed = 7;

  nlohmann::json to_json() const;
  static LandscapeSpec from_json(const nlohmann::json& j);
};

/// Pairwise Potts energies over clean sequences.
struct PottsEnergy {
  int length = 0;
  int alphabet_size = 0;
  std::vector<double> single;  // D x S
  std::vector<double> pair;    // D x D x S x S, only d < e used

  static PottsEnergy random(int length, int alphabet_size, double single_sd, double pair_sd,
                            RandomSource& rng);
  double operator()(std::span<const Token> x) const;
  nlohmann::json to_json() const;
  static PottsEnergy from_json(const nlohmann::json& j);
};

/// p(x) proportional to exp(-E(x)).
TabularDistribution gibbs_distribution(const PottsEnergy& energy);

class Landscape {
 public:
  Landscape(LandscapeSpec spec, PottsEnergy energy, std::vector<PottsEnergy> fitness);

  const LandscapeSpec& spec() const noexcept { return spec_; }
  int length() const noexcept { return spec_.length; }
  int alphabet_size() const noexcept { return spec_.alphabet_size; }
  std::shared_ptr<const TabularDistribution> p_data() const noexcept { return p_data_; }
  int axes() const noexcept { return static_cast<int>(fitness_.size()); }
  double fitness(const TokenSequence& x, int axis = 0) const;
  /// Minimum over axes; the target is score >= threshold.
  double score(const TokenSequence& x) const;
  double threshold() const noexcept { return threshold_; }
  bool in_target(const TokenSequence& x) const { return score(x) >= threshold_; }
  double target_mass() const noexcept { return target_mass_; }
  std::uint64_t target_size() const noexcept { return target_size_; }

  nlohmann::json to_json() const;
  static Landscape from_json(const nlohmann::json& j);

 private:
  LandscapeSpec spec_;
  PottsEnergy energy_;
  std::vector<PottsEnergy> fitness_;
  std::shared_ptr<const TabularDistribution> p_data_;
  std::vector<double> scores_;
  double threshold_ = 0.0;
  double target_mass_ = 0.0;
  std::uint64_t target_size_ = 0;
};

/// Gibbs p_data and planted fitness axes drawn from spec.seed.
/// Throws SizeError when S^D exceeds kMaxLandscapeStates.
Landscape make_landscape(const LandscapeSpec& spec);

struct SampleMetrics {
  double success_rate = 0.0;
  double diversity = 0.0;
  double novelty = 0.0;
};

int hamming(const TokenSequence& a, const TokenSequence& b);

/// Success by true fitness, mean pairwise Hamming distance, and mean Hamming
/// distance to the nearest reference sequence.
SampleMetrics metrics(std::span<const TokenSequence> samples, const Landscape& landscape,
                      std::span<const TokenSequence> reference);

struct CampaignConfig {
  LandscapeSpec landscape;
  std::size_t n_labeled = 1000;
  /// Fraction of labeled sequences (by score) treated as positives.
  double positive_fraction = 0.1;
  std::size_t k = 100;
  std::size_t filter_pool = 1000;
  std::vector<double> gammas{1.0, 10.0};
  std::vector<double> refit_fractions{0.02, 0.1};
  bool exact_arm = true;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::size_t classifier_epochs = 400;
  std::size_t refit_steps = 2000;
  unsigned threads = 1;

  nlohmann::json to_json() const;
  static CampaignConfig from_json(const nlohmann::json& j);
};

struct ArmResult {
  std::string arm;
  std::uint64_t seed = 0;
  SampleMetrics metrics;
  std::uint64_t n_oracle_calls = 0;
  double wall_time = 0.0;
};

struct CampaignReport {
  std::vector<ArmResult> rows;  // sorted by (arm, seed)
  nlohmann::json landscape_summary;

  std::vector<std::string> arms() const;
  std::vector<ArmResult> arm_rows(const std::string& arm) const;
  double mean_success(const std::string& arm) const;
  double mean_diversity(const std::string& arm) const;
  /// One row per (arm, seed); wall time is left out so reruns are byte-identical.
  std::string to_csv() const;
  /// Per-arm means with normal 95% intervals.
  nlohmann::json summary() const;
  /// Wall times and budget-matching tags relative to `reference_arm`.
  nlohmann::json timing(const std::string& reference_arm) const;
};

/// Sequences drawn from p_data outside the target, labeled by true score.
std::vector<TokenSequence> draw_labeled_pool(const Landscape& landscape, std::size_t n,
                                             RandomSource& rng);

CampaignReport run_campaign(const CampaignConfig& config);

/// Runs a single seed of the campaign against a prebuilt landscape.
std::vector<ArmResult> run_campaign_seed(const CampaignConfig& config, const Landscape& landscape,
                                         std::uint64_t seed);

/// Post-hoc filter: n_total unguided samples, keep the k best by predictor.
ArmResult run_posthoc_filter(const Denoiser& denoiser, const TimePredictor& predictor,
                             std::size_t n_total, std::size_t k, const Landscape& landscape,
                             std::span<const TokenSequence> reference, RandomSource& rng);

/// Refit the parametric denoiser under flow matching on the top fraction of
/// the labeled pool, then draw k samples from it.
ArmResult run_refit_baseline(std::span<const TokenSequence> labeled, double top_q, std::size_t k,
                             std::size_t steps, const Landscape& landscape, RandomSource& rng);

}  // namespace guidesampler
