#include "guidesampler/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "guidesampler/errors.hpp"

namespace guidesampler {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void fill_unguided(RateSet& out, const Denoiser& denoiser, const MaskedSequence& xt, double t,
                   const InterpolationSchedule& schedule, std::vector<double>& row) {
  if (!(t >= 0.0) || t >= 1.0 - kTimeHorizonGuard) {
    throw DomainError("rates are undefined at t >= 1 (time horizon); got t = " +
                      std::to_string(t));
  }
  const double hazard = schedule.hazard(t);
  out.time = t;
  out.source = xt;
  out.entries.clear();
  row.resize(static_cast<std::size_t>(denoiser.alphabet_size()));
  for (int d = 0; d < xt.length(); ++d) {
    if (!xt.is_masked(d)) continue;
    denoiser.position_posterior(xt, d, row);
    for (Token s = 0; s < denoiser.alphabet_size(); ++s) {
      out.entries.push_back({d, s, hazard * row[static_cast<std::size_t>(s)]});
    }
  }
}

// In-place exact / tag guidance with the predictor active at rates.time.
void apply_predictor_guidance(RateSet& rates, GuidanceMode mode, double gamma,
                              const TimePredictor* predictor, SamplerDiagnostics* diag) {
  if (gamma == 0.0 || predictor == nullptr || rates.entries.empty()) return;
  if (mode == GuidanceMode::kTag) {
    const GradientSurface g = predictor->gradient_surface(rates.source);
    if (diag) ++diag->gradient_calls;
    for (auto& e : rates.entries) {
      e.rate *= std::exp(gamma * g.log_ratio(rates.source, e.pos, e.symbol));
    }
    return;
  }
  // Exact: one call for the source, one per candidate.
  const double base = predictor->likelihood(rates.source);
  if (diag) ++diag->predictor_calls;
  MaskedSequence scratch = rates.source;
  for (auto& e : rates.entries) {
    scratch.set(e.pos, e.symbol);
    const double candidate = predictor->likelihood(scratch);
    scratch.set(e.pos, rates.source[e.pos]);
    if (diag) ++diag->predictor_calls;
    e.rate *= std::pow(candidate / base, gamma);
  }
}

// Fills `out` with the fully guided rates of cfg at (x, t).
void fill_guided(RateSet& out, RateSet& conditional, const Denoiser& denoiser,
                 const GuidanceConfig& cfg, const MaskedSequence& x, double t,
                 const InterpolationSchedule& schedule, std::vector<double>& row,
                 SamplerDiagnostics* diag) {
  fill_unguided(out, denoiser, x, t, schedule, row);
  switch (cfg.mode) {
    case GuidanceMode::kNone:
      return;
    case GuidanceMode::kPredictorFree:
      if (cfg.gamma != 0.0) {
        fill_unguided(conditional, *cfg.conditional_denoiser, x, t, schedule, row);
        out = predictor_free_rates(conditional, out, cfg.gamma);
      }
      return;
    case GuidanceMode::kExact:
    case GuidanceMode::kDeg:
      apply_predictor_guidance(out, GuidanceMode::kExact, cfg.gamma, cfg.active_predictor(t), diag);
      return;
    case GuidanceMode::kTag:
      apply_predictor_guidance(out, GuidanceMode::kTag, cfg.gamma, cfg.active_predictor(t), diag);
      return;
  }
}

// x^gamma with 0^0 = 1 and 0^positive = 0.
double weighted_log(double value, double exponent) {
  if (exponent == 0.0) return 0.0;
  return exponent * std::log(value);
}

}  // namespace

double RateSet::total() const {
  double acc = 0.0;
  for (const auto& e : entries) acc += e.rate;
  return acc;
}

double RateSet::rate(int pos, Token s) const {
  for (const auto& e : entries) {
    if (e.pos == pos && e.symbol == s) return e.rate;
  }
  return 0.0;
}

GuidanceMode parse_guidance_mode(const std::string& name) {
  if (name == "none") return GuidanceMode::kNone;
  if (name == "exact") return GuidanceMode::kExact;
  if (name == "tag") return GuidanceMode::kTag;
  if (name == "deg") return GuidanceMode::kDeg;
  if (name == "predictor_free") return GuidanceMode::kPredictorFree;
  throw ConfigError("unknown guidance mode: " + name);
}

std::string to_string(GuidanceMode mode) {
  switch (mode) {
    case GuidanceMode::kNone: return "none";
    case GuidanceMode::kExact: return "exact";
    case GuidanceMode::kTag: return "tag";
    case GuidanceMode::kDeg: return "deg";
    case GuidanceMode::kPredictorFree: return "predictor_free";
  }
  return "?";
}

void GuidanceConfig::validate(int length, int alphabet_size) const {
  if (eta != 0.0) {
    throw UnsupportedFeature("sampling stochasticity eta != 0 is not supported");
  }
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be finite and >= 0");
  if (!(switch_time >= 0.0 && switch_time <= 1.0)) {
    throw ConfigError("switch time must lie in [0, 1]");
  }
  auto check = [&](const TimePredictorPtr& p) {
    if (p && (p->length() != length || p->alphabet_size() != alphabet_size)) {
      throw ConfigError("predictor disagrees with the denoiser on D or S");
    }
  };
  check(predictor);
  check(early_predictor);
  switch (mode) {
    case GuidanceMode::kNone:
      return;
    case GuidanceMode::kExact:
    case GuidanceMode::kDeg:
    case GuidanceMode::kTag:
      if (!predictor) throw ConfigError("guidance mode " + to_string(mode) + " needs a predictor");
      if (mode == GuidanceMode::kTag) {
        if (!predictor->has_gradient() || (early_predictor && !early_predictor->has_gradient())) {
          throw CapabilityError("tag guidance needs a predictor with a gradient surface");
        }
      }
      return;
    case GuidanceMode::kPredictorFree:
      if (!conditional_denoiser) {
        throw ConfigError("predictor-free guidance needs a conditional denoiser");
      }
      if (conditional_denoiser->length() != length ||
          conditional_denoiser->alphabet_size() != alphabet_size) {
        throw ConfigError("conditional denoiser disagrees on D or S");
      }
      return;
  }
}

const TimePredictor* GuidanceConfig::active_predictor(double t) const {
  if (t < switch_time) return early_predictor.get();
  return predictor.get();
}

SamplerDiagnostics& SamplerDiagnostics::operator+=(const SamplerDiagnostics& other) {
  steps += other.steps;
  overflow_steps += other.overflow_steps;
  forced_unmasks += other.forced_unmasks;
  predictor_calls += other.predictor_calls;
  gradient_calls += other.gradient_calls;
  return *this;
}

nlohmann::json SamplerDiagnostics::to_json() const {
  return nlohmann::json{{"steps", steps},
                        {"overflow_steps", overflow_steps},
                        {"forced_unmasks", forced_unmasks},
                        {"predictor_calls", predictor_calls},
                        {"gradient_calls", gradient_calls}};
}

nlohmann::json DecodePath::to_json() const {
  nlohmann::json states_json = nlohmann::json::array();
  for (const auto& s : states) states_json.push_back(to_string(s));
  return nlohmann::json{{"order", order}, {"jump_times", jump_times}, {"states", states_json}};
}

// ---------------------------------------------------------------------------

RateSet unguided_rates(const Denoiser& denoiser, const MaskedSequence& xt, double t,
                       const InterpolationSchedule& schedule) {
  RateSet out;
  std::vector<double> row;
  fill_unguided(out, denoiser, xt, t, schedule, row);
  return out;
}

RateSet guide_rates(const RateSet& rates, const GuidanceConfig& cfg,
                    SamplerDiagnostics* diagnostics) {
  RateSet out = rates;
  switch (cfg.mode) {
    case GuidanceMode::kNone:
      return out;
    case GuidanceMode::kExact:
    case GuidanceMode::kDeg:
    case GuidanceMode::kTag: {
      const TimePredictor* predictor = cfg.active_predictor(rates.time);
      if (cfg.mode == GuidanceMode::kTag && predictor && !predictor->has_gradient()) {
        throw CapabilityError("tag guidance needs a predictor with a gradient surface");
      }
      apply_predictor_guidance(out, cfg.mode == GuidanceMode::kTag ? GuidanceMode::kTag
                                                                    : GuidanceMode::kExact,
                               cfg.gamma, predictor, diagnostics);
      return out;
    }
    case GuidanceMode::kPredictorFree:
      throw ConfigError("predictor-free guidance combines two rate sets; use predictor_free_rates");
  }
  return out;
}

RateSet predictor_free_rates(const RateSet& conditional, const RateSet& unconditional,
                             double gamma) {
  if (conditional.entries.size() != unconditional.entries.size() ||
      !(conditional.source == unconditional.source)) {
    throw DomainError("predictor-free guidance needs rate sets over the same transitions");
  }
  RateSet out = unconditional;
  for (std::size_t k = 0; k < out.entries.size(); ++k) {
    const auto& c = conditional.entries[k];
    auto& u = out.entries[k];
    if (c.pos != u.pos || c.symbol != u.symbol) {
      throw DomainError("predictor-free guidance: rate sets list transitions differently");
    }
    if (gamma == 0.0) continue;
    if (gamma == 1.0) {
      u.rate = c.rate;
      continue;
    }
    if (c.rate == 0.0 || u.rate == 0.0) {
      u.rate = 0.0;
      continue;
    }
    u.rate = std::exp(gamma * std::log(c.rate) + (1.0 - gamma) * std::log(u.rate));
  }
  return out;
}

// ---------------------------------------------------------------------------

SampleResult euler_sample(const Denoiser& denoiser, const GuidanceConfig& cfg,
                          const InterpolationSchedule& schedule, double dt, RandomSource& rng,
                          SamplerDiagnostics* diagnostics) {
  const int length = denoiser.length();
  const int s = denoiser.alphabet_size();
  cfg.validate(length, s);
  if (!(dt > 0.0 && dt <= 0.1)) throw DomainError("euler_sample: dt must lie in (0, 0.1]");

  SamplerDiagnostics local;
  SamplerDiagnostics* diag = diagnostics ? diagnostics : &local;

  MaskedSequence x = MaskedSequence::fully_masked(length, s);
  DecodePath path;
  path.states.push_back(x);
  RateSet rates;
  RateSet conditional;
  std::vector<double> row;
  std::vector<std::pair<int, Token>> jumps;

  // Without a predictor the rates only change through the hazard between
  // jumps, so they are rescaled rather than recomputed.
  const bool reuse = cfg.mode == GuidanceMode::kNone || cfg.mode == GuidanceMode::kPredictorFree ||
                     cfg.gamma == 0.0;
  bool stale = true;
  double rates_hazard = 1.0;

  const auto n_steps = static_cast<long>(std::floor((1.0 - dt) / dt + 1e-9));
  for (long k = 0; k < n_steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (stale || !reuse) {
      fill_guided(rates, conditional, denoiser, cfg, x, t, schedule, row, diag);
      rates_hazard = schedule.hazard(t);
      stale = false;
    }
    const double scale = dt * schedule.hazard(t) / rates_hazard;
    ++diag->steps;

    // Every masked position jumps independently from the same state.
    jumps.clear();
    bool overflow = false;
    for (std::size_t begin = 0; begin < rates.entries.size();) {
      std::size_t end = begin;
      double outflow = 0.0;
      while (end < rates.entries.size() && rates.entries[end].pos == rates.entries[begin].pos) {
        outflow += rates.entries[end].rate;
        ++end;
      }
      outflow *= scale;
      if (!std::isfinite(outflow)) throw DomainError("euler_sample: non-finite outflow");
      double u = rng.uniform();
      if (outflow > 1.0) {
        overflow = true;
        u *= outflow;
      }
      if (u < outflow) {
        double acc = 0.0;
        const RateEntry* chosen = nullptr;
        for (std::size_t e = begin; e < end; ++e) {
          if (rates.entries[e].rate <= 0.0) continue;
          acc += rates.entries[e].rate * scale;
          chosen = &rates.entries[e];
          if (u < acc) break;
        }
        if (chosen != nullptr) jumps.emplace_back(chosen->pos, chosen->symbol);
      }
      begin = end;
    }
    if (overflow) ++diag->overflow_steps;
    for (const auto& [pos, sym] : jumps) {
      x.set(pos, sym);
      path.order.push_back(pos);
      path.jump_times.push_back(t + dt);
      path.states.push_back(x);
    }
    if (!jumps.empty()) {
      stale = true;
      if (x.is_clean()) break;
    }
  }

  if (!x.is_clean()) {
    const double t_end = static_cast<double>(n_steps) * dt;
    fill_guided(rates, conditional, denoiser, cfg, x, t_end, schedule, row, diag);
    std::vector<double> weights(static_cast<std::size_t>(s));
    jumps.clear();
    for (int d : x.masked_positions()) {
      std::fill(weights.begin(), weights.end(), 0.0);
      for (const auto& e : rates.entries) {
        if (e.pos == d) weights[static_cast<std::size_t>(e.symbol)] = e.rate;
      }
      if (!(std::accumulate(weights.begin(), weights.end(), 0.0) > 0.0)) {
        throw DegenerateStep("euler_sample: no positive rate at position " + std::to_string(d) +
                                 " in the final step",
                             static_cast<std::size_t>(n_steps));
      }
      jumps.emplace_back(d, static_cast<Token>(rng.categorical(weights)));
    }
    for (const auto& [pos, sym] : jumps) {
      ++diag->forced_unmasks;
      x.set(pos, sym);
      path.order.push_back(pos);
      path.jump_times.push_back(t_end);
      path.states.push_back(x);
    }
  }
  return {x.to_clean(), std::move(path)};
}

JumpTimes sample_jump_times(int length, const InterpolationSchedule& schedule, RandomSource& rng) {
  if (length < 1) throw DomainError("sample_jump_times: D must be at least 1");
  std::vector<double> per_position(static_cast<std::size_t>(length));
  for (auto& t : per_position) t = schedule.inverse(rng.uniform());
  JumpTimes out;
  out.order.resize(static_cast<std::size_t>(length));
  std::iota(out.order.begin(), out.order.end(), 0);
  std::stable_sort(out.order.begin(), out.order.end(), [&](int a, int b) {
    return per_position[static_cast<std::size_t>(a)] < per_position[static_cast<std::size_t>(b)];
  });
  for (int pos : out.order) out.times.push_back(per_position[static_cast<std::size_t>(pos)]);
  return out;
}

SampleResult aoarm_sample(const Denoiser& denoiser, const GuidanceConfig& cfg, RandomSource& rng,
                          SamplerDiagnostics* diagnostics, const InterpolationSchedule& schedule) {
  const int length = denoiser.length();
  const int s = denoiser.alphabet_size();
  cfg.validate(length, s);
  SamplerDiagnostics local;
  SamplerDiagnostics* diag = diagnostics ? diagnostics : &local;

  // Decoding order first, then times sorted and assigned step by step.
  std::vector<int> order(static_cast<std::size_t>(length));
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t k = order.size(); k > 1; --k) {
    std::swap(order[k - 1], order[rng.uniform_index(k)]);
  }
  std::vector<double> times(static_cast<std::size_t>(length));
  for (auto& t : times) t = schedule.inverse(rng.uniform());
  std::sort(times.begin(), times.end());

  MaskedSequence x = MaskedSequence::fully_masked(length, s);
  DecodePath path;
  path.order = order;
  path.jump_times = times;
  path.states.push_back(x);

  std::vector<double> row(static_cast<std::size_t>(s));
  std::vector<double> cond_row(static_cast<std::size_t>(s));
  std::vector<double> logw(static_cast<std::size_t>(s));
  std::vector<double> weights(static_cast<std::size_t>(s));

  for (std::size_t step = 0; step < order.size(); ++step) {
    const int d = order[step];
    ++diag->steps;
    denoiser.position_posterior(x, d, row);
    for (Token c = 0; c < s; ++c) {
      const double r = row[static_cast<std::size_t>(c)];
      logw[static_cast<std::size_t>(c)] = r > 0.0 ? std::log(r) : kNegInf;
    }
    const double gamma = cfg.gamma;
    const TimePredictor* predictor = cfg.active_predictor(times[step]);
    switch (cfg.mode) {
      case GuidanceMode::kNone:
        break;
      case GuidanceMode::kExact:
      case GuidanceMode::kDeg:
        if (gamma == 0.0 || predictor == nullptr) break;
        for (Token c = 0; c < s; ++c) {
          auto& lw = logw[static_cast<std::size_t>(c)];
          if (lw == kNegInf) continue;
          x.set(d, c);
          lw += gamma * std::log(predictor->likelihood(x));
          ++diag->predictor_calls;
        }
        x.set(d, x.mask());
        break;
      case GuidanceMode::kTag: {
        if (gamma == 0.0 || predictor == nullptr) break;
        const GradientSurface g = predictor->gradient_surface(x);
        ++diag->gradient_calls;
        for (Token c = 0; c < s; ++c) logw[static_cast<std::size_t>(c)] += gamma * g.log_ratio(x, d, c);
        break;
      }
      case GuidanceMode::kPredictorFree: {
        if (gamma == 0.0) break;
        cfg.conditional_denoiser->position_posterior(x, d, cond_row);
        for (Token c = 0; c < s; ++c) {
          const double u = row[static_cast<std::size_t>(c)];
          const double v = cond_row[static_cast<std::size_t>(c)];
          auto& lw = logw[static_cast<std::size_t>(c)];
          if (u == 0.0 || v == 0.0) {
            // Geometric mixing keeps zero wherever a factor with positive exponent vanishes.
            const bool zero = (v == 0.0 && gamma > 0.0) || (u == 0.0 && gamma != 1.0);
            lw = zero ? kNegInf : weighted_log(v, gamma);
            continue;
          }
          lw = weighted_log(v, gamma) + weighted_log(u, 1.0 - gamma);
        }
        break;
      }
    }
    double hi = kNegInf;
    for (double lw : logw) {
      if (!std::isnan(lw)) hi = std::max(hi, lw);
    }
    if (!std::isfinite(hi)) {
      throw DegenerateStep("aoarm_sample: every guided weight vanished at step " +
                               std::to_string(step) + " (position " + std::to_string(d) + ")",
                           step);
    }
    for (Token c = 0; c < s; ++c) {
      const double lw = logw[static_cast<std::size_t>(c)];
      weights[static_cast<std::size_t>(c)] = std::isnan(lw) ? 0.0 : std::exp(lw - hi);
    }
    x.set(d, static_cast<Token>(rng.categorical(weights)));
    path.states.push_back(x);
  }
  return {x.to_clean(), std::move(path)};
}

double lemma1_density(int i, double tau_i, double tau_prev, int length,
                      const InterpolationSchedule& schedule) {
  if (length < 1 || i < 1 || i > length) throw DomainError("lemma1_density: need 1 <= i <= D");
  if (!(tau_prev >= 0.0 && tau_prev < tau_i && tau_i < 1.0)) {
    throw DomainError("lemma1_density: need 0 <= tau_prev < tau_i < 1");
  }
  const double survive_prev = 1.0 - schedule.kappa(tau_prev);
  const double ratio = (1.0 - schedule.kappa(tau_i)) / survive_prev;
  return static_cast<double>(length - i + 1) * schedule.kappa_dot(tau_i) / survive_prev *
         std::pow(ratio, length - i);
}

std::vector<SampleResult> run_chains(std::size_t n, std::uint64_t seed, unsigned threads,
                                     const ChainFn& chain, SamplerDiagnostics* diagnostics) {
  std::vector<SampleResult> out(n);
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    SamplerDiagnostics diag;
    for (std::size_t k = 0; k < n; ++k) {
      RandomSource rng(seed, k);
      out[k] = chain(rng, diag);
    }
    if (diagnostics) *diagnostics += diag;
    return out;
  }
  std::vector<SamplerDiagnostics> per_thread(threads);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = w; k < n; k += threads) {
          RandomSource rng(seed, k);
          out[k] = chain(rng, per_thread[w]);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  if (diagnostics) {
    for (const auto& d : per_thread) *diagnostics += d;
  }
  return out;
}

}  // namespace guidesampler
