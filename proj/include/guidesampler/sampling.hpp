#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "guidesampler/denoiser.hpp"
#include "guidesampler/predictors.hpp"
#include "guidesampler/random.hpp"
#include "guidesampler/schedule.hpp"
#include "guidesampler/sequence.hpp"

namespace guidesampler {

/// Euler integration stops this close to t = 1, where the hazard diverges.
inline constexpr double kTimeHorizonGuard = 1e-9;

struct RateEntry {
  int pos;
  Token symbol;
  double rate;
};

/// Single-position unmasking rates R_t(x, x~) out of `source` at time `time`.
/// Entries exist only at masked positions and only for real target symbols.
struct RateSet {
  double time = 0.0;
  MaskedSequence source;
  std::vector<RateEntry> entries;

  double total() const;
  /// Rate for (pos, s), 0 if absent.
  double rate(int pos, Token s) const;
};

enum class GuidanceMode { kNone, kExact, kTag, kDeg, kPredictorFree };

GuidanceMode parse_guidance_mode(const std::string& name);
std::string to_string(GuidanceMode mode);

struct GuidanceConfig {
  GuidanceMode mode = GuidanceMode::kNone;
  double gamma = 1.0;
  TimePredictorPtr predictor;
  /// Staged guidance: before switch_time, guide with early_predictor (or not
  /// at all when it is null); from switch_time on, with predictor.
  TimePredictorPtr early_predictor;
  double switch_time = 0.0;
  /// Conditional model for predictor-free guidance.
  std::shared_ptr<const Denoiser> conditional_denoiser;
  /// Sampling stochasticity; only the minimal-jump value 0 is supported.
  double eta = 0.0;

  /// Throws ConfigError / CapabilityError / UnsupportedFeature on inconsistent settings.
  void validate(int length, int alphabet_size) const;
  /// Predictor in effect at time t (may be null).
  const TimePredictor* active_predictor(double t) const;
};

struct SamplerDiagnostics {
  std::uint64_t steps = 0;
  std::uint64_t overflow_steps = 0;
  std::uint64_t forced_unmasks = 0;
  std::uint64_t predictor_calls = 0;
  std::uint64_t gradient_calls = 0;

  SamplerDiagnostics& operator+=(const SamplerDiagnostics& other);
  nlohmann::json to_json() const;
};

/// The realized path of one generation: order[i] is the position unmasked at
/// step i, at time jump_times[i]; states[i] is the sequence before step i and
/// states[D] is clean.
struct DecodePath {
  std::vector<int> order;
  std::vector<double> jump_times;
  std::vector<MaskedSequence> states;

  nlohmann::json to_json() const;
};

struct SampleResult {
  TokenSequence sequence;
  DecodePath path;
};

/// R(d, s) = kappa_dot(t) / (1 - kappa(t)) * p(x1^d = s | xt) at masked d.
/// Throws DomainError when t >= 1 - kTimeHorizonGuard.
RateSet unguided_rates(const Denoiser& denoiser, const MaskedSequence& xt, double t,
                       const InterpolationSchedule& schedule);

/// Predictor guidance of a rate set (modes exact and tag):
///  - exact: R(x, x~) * (p(y | x~) / p(y | x))^gamma, one predictor call per entry plus one;
///  - tag:   R(x, x~) * exp(gamma * (x~ - x)^T grad log p(y | x)), one gradient call.
/// gamma = 0 returns the input unchanged. Mode none returns the input.
RateSet guide_rates(const RateSet& rates, const GuidanceConfig& cfg,
                    SamplerDiagnostics* diagnostics = nullptr);

/// Entry-wise R_cond^gamma * R_uncond^(1 - gamma).
RateSet predictor_free_rates(const RateSet& conditional, const RateSet& unconditional,
                             double gamma);

/// Euler integration of the (guided) CTMC from the fully masked state at t=0
/// to t = 1 - dt, followed by one forced draw for each still-masked position.
/// Each masked position jumps independently with probability sum_s R(d, s) dt;
/// a position whose outflow exceeds 1 is renormalized and the step counted.
/// Simultaneous jumps enter the path in ascending position order with equal times.
SampleResult euler_sample(const Denoiser& denoiser, const GuidanceConfig& cfg,
                          const InterpolationSchedule& schedule, double dt, RandomSource& rng,
                          SamplerDiagnostics* diagnostics = nullptr);

struct JumpTimes {
  std::vector<double> times;  // sorted
  std::vector<int> order;     // order[i] = position whose time ranked i
};

/// Independent per-position jump times kappa^{-1}(U), sorted; ties by position.
JumpTimes sample_jump_times(int length, const InterpolationSchedule& schedule, RandomSource& rng);

/// Any-order autoregressive sampling: uniform decoding order, then one
/// (guided) categorical draw per position from the time-free denoiser
/// conditional. Under mode deg (or exact) each step weights symbol s by
/// p(y | context with s)^gamma; tag uses the first-order estimate.
/// Jump times are drawn after the order (or before decoding when staged
/// guidance needs them).
SampleResult aoarm_sample(const Denoiser& denoiser, const GuidanceConfig& cfg, RandomSource& rng,
                          SamplerDiagnostics* diagnostics = nullptr,
                          const InterpolationSchedule& schedule = InterpolationSchedule::uniform());

/// Density of the i-th jump time given the previous one (1-based i):
/// (D - i + 1) kappa_dot(tau_i) / (1 - kappa(tau_prev)) * ((1 - kappa(tau_i)) / (1 - kappa(tau_prev)))^(D - i)
double lemma1_density(int i, double tau_i, double tau_prev, int length,
                      const InterpolationSchedule& schedule);

using ChainFn = std::function<SampleResult(RandomSource&, SamplerDiagnostics&)>;

/// Runs n independent chains, chain k on RandomSource(seed, k). Results are
/// in chain order regardless of the thread count.
std::vector<SampleResult> run_chains(std::size_t n, std::uint64_t seed, unsigned threads,
                                     const ChainFn& chain,
                                     SamplerDiagnostics* diagnostics = nullptr);

}  // namespace guidesampler
