#include "guidesampler/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <mutex>
#include <sstream>
#include <thread>

#include "guidesampler/denoiser.hpp"
#include "guidesampler/errors.hpp"
#include "guidesampler/sampling.hpp"
#include "guidesampler/training.hpp"

namespace guidesampler {

namespace {

template <class T>
T take(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                    const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

std::string format_number(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

nlohmann::json LandscapeSpec::to_json() const {
  return nlohmann::json{{"D", length},
                        {"S", alphabet_size},
                        {"energy_single", energy_single},
                        {"energy_pair", energy_pair},
                        {"fitness_single", fitness_single},
                        {"fitness_pair", fitness_pair},
                        {"axes", axes},
                        {"axis_correlation", axis_correlation},
                        {"target_mass", target_mass},
                        {"seed", seed}};
}

LandscapeSpec LandscapeSpec::from_json(const nlohmann::json& j) {
  reject_unknown(j,
                 {"D", "S", "energy_single", "energy_pair", "fitness_single", "fitness_pair",
                  "axes", "axis_correlation", "target_mass", "seed"},
                 "landscape");
  LandscapeSpec s;
  s.length = take(j, "D", s.length);
  s.alphabet_size = take(j, "S", s.alphabet_size);
  s.energy_single = take(j, "energy_single", s.energy_single);
  s.energy_pair = take(j, "energy_pair", s.energy_pair);
  s.fitness_single = take(j, "fitness_single", s.fitness_single);
  s.fitness_pair = take(j, "fitness_pair", s.fitness_pair);
  s.axes = take(j, "axes", s.axes);
  s.axis_correlation = take(j, "axis_correlation", s.axis_correlation);
  s.target_mass = take(j, "target_mass", s.target_mass);
  s.seed = take(j, "seed", s.seed);
  return s;
}

PottsEnergy PottsEnergy::random(int length, int alphabet_size, double single_sd, double pair_sd,
                                RandomSource& rng) {
  PottsEnergy e;
  e.length = length;
  e.alphabet_size = alphabet_size;
  const auto d = static_cast<std::size_t>(length);
  const auto s = static_cast<std::size_t>(alphabet_size);
  e.single.resize(d * s);
  e.pair.assign(d * d * s * s, 0.0);
  for (double& v : e.single) v = single_sd * rng.normal();
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      for (std::size_t k = 0; k < s * s; ++k) e.pair[(i * d + j) * s * s + k] = pair_sd * rng.normal();
    }
  }
  return e;
}

double PottsEnergy::operator()(std::span<const Token> x) const {
  const auto d = static_cast<std::size_t>(length);
  const auto s = static_cast<std::size_t>(alphabet_size);
  double v = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const auto a = static_cast<std::size_t>(x[i]);
    v += single[i * s + a];
    for (std::size_t j = i + 1; j < d; ++j) {
      v += pair[(i * d + j) * s * s + a * s + static_cast<std::size_t>(x[j])];
    }
  }
  return v;
}

nlohmann::json PottsEnergy::to_json() const {
  return nlohmann::json{{"D", length}, {"S", alphabet_size}, {"single", single}, {"pair", pair}};
}

PottsEnergy PottsEnergy::from_json(const nlohmann::json& j) {
  reject_unknown(j, {"D", "S", "single", "pair"}, "energy");
  PottsEnergy e;
  e.length = j.at("D").get<int>();
  e.alphabet_size = j.at("S").get<int>();
  e.single = j.at("single").get<std::vector<double>>();
  e.pair = j.at("pair").get<std::vector<double>>();
  const auto d = static_cast<std::size_t>(e.length);
  const auto s = static_cast<std::size_t>(e.alphabet_size);
  if (e.single.size() != d * s || e.pair.size() != d * d * s * s) {
    throw ConfigError("energy tables have the wrong size");
  }
  return e;
}

TabularDistribution gibbs_distribution(const PottsEnergy& energy) {
  const std::uint64_t n = state_count(energy.length, energy.alphabet_size);
  if (n > kMaxTabularStates) throw SizeError("gibbs_distribution: too many states");
  std::vector<double> e(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    e[i] = energy(decode_index(i, energy.length, energy.alphabet_size).tokens());
  }
  const double lowest = *std::min_element(e.begin(), e.end());
  for (double& v : e) v = std::exp(-(v - lowest));
  return TabularDistribution::from_unnormalized(energy.length, energy.alphabet_size, std::move(e));
}

// ---------------------------------------------------------------------------

Landscape::Landscape(LandscapeSpec spec, PottsEnergy energy, std::vector<PottsEnergy> fitness)
    : spec_(spec), energy_(std::move(energy)), fitness_(std::move(fitness)) {
  const std::uint64_t n = state_count(spec_.length, spec_.alphabet_size);
  if (n > kMaxLandscapeStates) {
    throw SizeError("landscape: S^D = " + std::to_string(n) + " exceeds the enumeration cap of " +
                    std::to_string(kMaxLandscapeStates));
  }
  if (fitness_.empty() || fitness_.size() > 2) throw ConfigError("landscape: axes must be 1 or 2");
  if (!(spec_.target_mass > 0.0 && spec_.target_mass < 1.0)) {
    throw ConfigError("landscape: target_mass must lie in (0, 1)");
  }
  scores_.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const TokenSequence x = decode_index(i, spec_.length, spec_.alphabet_size);
    double score = std::numeric_limits<double>::infinity();
    for (const auto& f : fitness_) score = std::min(score, f(x.tokens()));
    scores_[i] = score;
  }
  p_data_ = std::make_shared<const TabularDistribution>(gibbs_distribution(energy_));

  // Largest top-score region whose mass stays within target_mass.
  std::vector<std::uint64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores_[a] > scores_[b]; });
  double mass = 0.0;
  std::uint64_t count = 0;
  for (auto idx : order) {
    const double next = mass + p_data_->probability(idx);
    if (next > spec_.target_mass) break;
    mass = next;
    ++count;
  }
  if (count == 0) {
    throw ConfigError("landscape: the top sequence alone exceeds target_mass");
  }
  threshold_ = scores_[order[count - 1]];
  target_mass_ = mass;
  target_size_ = count;
}

double Landscape::fitness(const TokenSequence& x, int axis) const {
  return fitness_.at(static_cast<std::size_t>(axis))(x.tokens());
}

double Landscape::score(const TokenSequence& x) const { return scores_.at(encode_index(x)); }

nlohmann::json Landscape::to_json() const {
  nlohmann::json fit = nlohmann::json::array();
  for (const auto& f : fitness_) fit.push_back(f.to_json());
  return nlohmann::json{{"spec", spec_.to_json()},
                        {"energy", energy_.to_json()},
                        {"fitness", fit},
                        {"threshold", threshold_},
                        {"target_mass", target_mass_},
                        {"target_size", target_size_}};
}

Landscape Landscape::from_json(const nlohmann::json& j) {
  reject_unknown(j, {"spec", "energy", "fitness", "threshold", "target_mass", "target_size"},
                 "landscape file");
  std::vector<PottsEnergy> fit;
  for (const auto& f : j.at("fitness")) fit.push_back(PottsEnergy::from_json(f));
  return Landscape(LandscapeSpec::from_json(j.at("spec")), PottsEnergy::from_json(j.at("energy")),
                   std::move(fit));
}

Landscape make_landscape(const LandscapeSpec& spec) {
  if (spec.length < 1 || spec.alphabet_size < 2) throw ConfigError("landscape: need D >= 1, S >= 2");
  const std::uint64_t n = state_count(spec.length, spec.alphabet_size);
  if (n > kMaxLandscapeStates) {
    throw SizeError("landscape: S^D = " + std::to_string(n) + " exceeds the enumeration cap of " +
                    std::to_string(kMaxLandscapeStates));
  }
  if (spec.axes != 1 && spec.axes != 2) throw ConfigError("landscape: axes must be 1 or 2");
  RandomSource root(spec.seed, 0);
  RandomSource energy_rng = root.substream(1);
  RandomSource fitness_rng = root.substream(2);
  PottsEnergy energy = PottsEnergy::random(spec.length, spec.alphabet_size, spec.energy_single,
                                           spec.energy_pair, energy_rng);
  std::vector<PottsEnergy> fitness;
  fitness.push_back(PottsEnergy::random(spec.length, spec.alphabet_size, spec.fitness_single,
                                        spec.fitness_pair, fitness_rng));
  if (spec.axes == 2) {
    // Second axis shares single-site effects with the first at the given correlation.
    PottsEnergy second = PottsEnergy::random(spec.length, spec.alphabet_size, spec.fitness_single,
                                             spec.fitness_pair, fitness_rng);
    const double rho = spec.axis_correlation;
    const double rest = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    for (std::size_t k = 0; k < second.single.size(); ++k) {
      second.single[k] = rho * fitness[0].single[k] + rest * second.single[k];
    }
    fitness.push_back(std::move(second));
  }
  return Landscape(spec, std::move(energy), std::move(fitness));
}

// ---------------------------------------------------------------------------

int hamming(const TokenSequence& a, const TokenSequence& b) { return hamming_distance(a, b); }

SampleMetrics metrics(std::span<const TokenSequence> samples, const Landscape& landscape,
                      std::span<const TokenSequence> reference) {
  if (samples.empty()) throw DomainError("metrics: no samples");
  SampleMetrics m;
  std::size_t hits = 0;
  for (const auto& x : samples) hits += landscape.in_target(x);
  m.success_rate = static_cast<double>(hits) / static_cast<double>(samples.size());

  if (samples.size() > 1) {
    double total = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      for (std::size_t j = i + 1; j < samples.size(); ++j) total += hamming(samples[i], samples[j]);
    }
    const auto n = static_cast<double>(samples.size());
    m.diversity = total / (n * (n - 1.0) / 2.0);
  }

  if (!reference.empty()) {
    double total = 0.0;
    for (const auto& x : samples) {
      int best = x.length();
      for (const auto& r : reference) {
        best = std::min(best, hamming(x, r));
        if (best == 0) break;
      }
      total += best;
    }
    m.novelty = total / static_cast<double>(samples.size());
  }
  return m;
}

// ---------------------------------------------------------------------------

nlohmann::json CampaignConfig::to_json() const {
  return nlohmann::json{{"landscape", landscape.to_json()},
                        {"n_labeled", n_labeled},
                        {"positive_fraction", positive_fraction},
                        {"k", k},
                        {"filter_pool", filter_pool},
                        {"gammas", gammas},
                        {"refit_fractions", refit_fractions},
                        {"exact_arm", exact_arm},
                        {"seeds", seeds},
                        {"classifier_epochs", classifier_epochs},
                        {"refit_steps", refit_steps},
                        {"threads", threads}};
}

CampaignConfig CampaignConfig::from_json(const nlohmann::json& j) {
  reject_unknown(j,
                 {"landscape", "n_labeled", "positive_fraction", "k", "filter_pool", "gammas",
                  "refit_fractions", "exact_arm", "seeds", "classifier_epochs", "refit_steps",
                  "threads"},
                 "campaign");
  CampaignConfig c;
  if (j.contains("landscape")) c.landscape = LandscapeSpec::from_json(j.at("landscape"));
  c.n_labeled = take(j, "n_labeled", c.n_labeled);
  c.positive_fraction = take(j, "positive_fraction", c.positive_fraction);
  c.k = take(j, "k", c.k);
  c.filter_pool = take(j, "filter_pool", c.filter_pool);
  c.gammas = take(j, "gammas", c.gammas);
  c.refit_fractions = take(j, "refit_fractions", c.refit_fractions);
  c.exact_arm = take(j, "exact_arm", c.exact_arm);
  c.seeds = take(j, "seeds", c.seeds);
  c.classifier_epochs = take(j, "classifier_epochs", c.classifier_epochs);
  c.refit_steps = take(j, "refit_steps", c.refit_steps);
  c.threads = take(j, "threads", c.threads);
  if (c.k == 0 || c.k > c.filter_pool) throw ConfigError("campaign: need 0 < k <= filter_pool");
  if (c.seeds.empty()) throw ConfigError("campaign: no seeds");
  if (!(c.positive_fraction > 0.0 && c.positive_fraction < 1.0)) {
    throw ConfigError("campaign: positive_fraction must lie in (0, 1)");
  }
  return c;
}

std::vector<std::string> CampaignReport::arms() const {
  std::vector<std::string> out;
  for (const auto& r : rows) {
    if (std::find(out.begin(), out.end(), r.arm) == out.end()) out.push_back(r.arm);
  }
  return out;
}

std::vector<ArmResult> CampaignReport::arm_rows(const std::string& arm) const {
  std::vector<ArmResult> out;
  std::copy_if(rows.begin(), rows.end(), std::back_inserter(out),
               [&](const ArmResult& r) { return r.arm == arm; });
  return out;
}

double CampaignReport::mean_success(const std::string& arm) const {
  const auto r = arm_rows(arm);
  if (r.empty()) throw DomainError("campaign: no rows for arm " + arm);
  double acc = 0.0;
  for (const auto& row : r) acc += row.metrics.success_rate;
  return acc / static_cast<double>(r.size());
}

double CampaignReport::mean_diversity(const std::string& arm) const {
  const auto r = arm_rows(arm);
  if (r.empty()) throw DomainError("campaign: no rows for arm " + arm);
  double acc = 0.0;
  for (const auto& row : r) acc += row.metrics.diversity;
  return acc / static_cast<double>(r.size());
}

std::string CampaignReport::to_csv() const {
  std::ostringstream out;
  out << "arm,seed,success_rate,diversity,novelty,n_oracle_calls\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.arm << ',' << r.seed << ',' << r.metrics.success_rate << ',' << r.metrics.diversity
        << ',' << r.metrics.novelty << ',' << r.n_oracle_calls << '\n';
  }
  return out.str();
}

nlohmann::json CampaignReport::summary() const {
  nlohmann::json arms_json = nlohmann::json::object();
  for (const auto& arm : arms()) {
    const auto r = arm_rows(arm);
    const auto n = static_cast<double>(r.size());
    nlohmann::json entry;
    auto describe = [&](const char* name, auto get) {
      double m = 0.0;
      for (const auto& row : r) m += get(row);
      m /= n;
      double v = 0.0;
      for (const auto& row : r) v += (get(row) - m) * (get(row) - m);
      const double sd = r.size() > 1 ? std::sqrt(v / (n - 1.0)) : 0.0;
      const double half = 1.96 * sd / std::sqrt(n);
      entry[name] = {{"mean", m}, {"sd", sd}, {"ci_low", m - half}, {"ci_high", m + half}};
    };
    describe("success_rate", [](const ArmResult& x) { return x.metrics.success_rate; });
    describe("diversity", [](const ArmResult& x) { return x.metrics.diversity; });
    describe("novelty", [](const ArmResult& x) { return x.metrics.novelty; });
    describe("n_oracle_calls", [](const ArmResult& x) { return static_cast<double>(x.n_oracle_calls); });
    entry["seeds"] = r.size();
    arms_json[arm] = entry;
  }
  return nlohmann::json{{"landscape", landscape_summary}, {"arms", arms_json}};
}

nlohmann::json CampaignReport::timing(const std::string& reference_arm) const {
  std::map<std::string, double> totals;
  for (const auto& r : rows) totals[r.arm] += r.wall_time;
  const double ref = totals.count(reference_arm) ? totals[reference_arm] : 0.0;
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [arm, t] : totals) {
    const double ratio = ref > 0.0 ? t / ref : 0.0;
    out[arm] = {{"wall_time_total", t},
                {"ratio_to_reference", ratio},
                {"matched", ratio >= 0.5 && ratio <= 2.0}};
  }
  return nlohmann::json{{"reference_arm", reference_arm}, {"arms", out}};
}

// ---------------------------------------------------------------------------

std::vector<TokenSequence> draw_labeled_pool(const Landscape& landscape, std::size_t n,
                                             RandomSource& rng) {
  if (landscape.target_mass() > 0.5) throw DomainError("labeled pool: target region too large");
  std::vector<TokenSequence> out;
  out.reserve(n);
  while (out.size() < n) {
    TokenSequence x = landscape.p_data()->sample(rng);
    if (!landscape.in_target(x)) out.push_back(std::move(x));
  }
  return out;
}

namespace {

std::vector<TokenSequence> draw_unguided(const Denoiser& denoiser, std::size_t n,
                                         RandomSource& rng) {
  std::vector<TokenSequence> out;
  out.reserve(n);
  GuidanceConfig cfg;
  for (std::size_t i = 0; i < n; ++i) {
    RandomSource chain = rng.substream(i);
    out.push_back(aoarm_sample(denoiser, cfg, chain).sequence);
  }
  return out;
}

std::vector<LabeledSequence> label_top(std::span<const TokenSequence> pool,
                                       const std::vector<double>& values, double fraction) {
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto cut_index = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(sorted.size()))), 1,
      sorted.size() - 1);
  const double cut = sorted[cut_index - 1];
  std::vector<LabeledSequence> out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    out.push_back({pool[i], values[i] >= cut ? 1.0 : 0.0});
  }
  return out;
}

std::string gamma_arm(double gamma) { return "guided_g" + format_number(gamma); }

}  // namespace

ArmResult run_posthoc_filter(const Denoiser& denoiser, const TimePredictor& predictor,
                             std::size_t n_total, std::size_t k, const Landscape& landscape,
                             std::span<const TokenSequence> reference, RandomSource& rng) {
  if (k == 0 || k > n_total) throw DomainError("post-hoc filter: need 0 < k <= n_total");
  const auto start = std::chrono::steady_clock::now();
  auto pool = draw_unguided(denoiser, n_total, rng);
  std::vector<double> scores(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    scores[i] = predictor.likelihood(MaskedSequence(pool[i]));
  }
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  std::vector<TokenSequence> kept;
  for (std::size_t i = 0; i < k; ++i) kept.push_back(pool[idx[i]]);
  ArmResult r;
  r.arm = "filter";
  r.metrics = metrics(kept, landscape, reference);
  r.n_oracle_calls = n_total;
  r.wall_time = seconds_since(start);
  return r;
}

ArmResult run_refit_baseline(std::span<const TokenSequence> labeled, double top_q, std::size_t k,
                             std::size_t steps, const Landscape& landscape, RandomSource& rng) {
  if (!(top_q > 0.0 && top_q <= 1.0)) throw DomainError("refit: top_q must lie in (0, 1]");
  const auto keep = static_cast<std::size_t>(std::floor(top_q * static_cast<double>(labeled.size())));
  if (keep == 0) {
    throw DomainError("refit: top_q = " + format_number(top_q) + " selects no sequence out of " +
                      std::to_string(labeled.size()));
  }
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::size_t> idx(labeled.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
    return landscape.score(labeled[a]) > landscape.score(labeled[b]);
  });
  std::vector<WeightedSample> curated;
  for (std::size_t i = 0; i < keep; ++i) curated.push_back({labeled[idx[i]], 1.0});
  DenoiserTrainingOptions options;
  options.steps = steps;
  RandomSource train_rng = rng.substream(1);
  const auto trained = train_denoiser(LossVariant::kFlowMatching, curated, options, train_rng);
  RandomSource sample_rng = rng.substream(2);
  const auto samples = draw_unguided(trained.model, k, sample_rng);
  ArmResult r;
  r.arm = "refit_q" + format_number(top_q);
  r.metrics = metrics(samples, landscape, labeled);
  r.wall_time = seconds_since(start);
  return r;
}

std::vector<ArmResult> run_campaign_seed(const CampaignConfig& config, const Landscape& landscape,
                                         std::uint64_t seed) {
  RandomSource root(seed, 0);
  std::vector<ArmResult> rows;
  const int length = landscape.length();
  const int s = landscape.alphabet_size();

  RandomSource pool_rng = root.substream(1);
  const auto pool = draw_labeled_pool(landscape, config.n_labeled, pool_rng);

  // Guidance predictor: one noisy classifier per fitness axis.
  const auto classifier_start = std::chrono::steady_clock::now();
  std::vector<TimePredictorPtr> parts;
  for (int axis = 0; axis < landscape.axes(); ++axis) {
    std::vector<double> values;
    for (const auto& x : pool) values.push_back(landscape.fitness(x, axis));
    const auto labeled = label_top(pool, values, config.positive_fraction);
    ClassifierTrainingOptions options;
    options.epochs = config.classifier_epochs;
    RandomSource train_rng = root.substream(10 + static_cast<std::uint64_t>(axis));
    parts.push_back(std::make_shared<PottsClassifier>(
        train_noisy_classifier(labeled, options, train_rng)));
  }
  const TimePredictorPtr predictor =
      parts.size() == 1 ? parts.front() : std::make_shared<ProductPredictor>(parts);
  const double classifier_time = seconds_since(classifier_start);

  const ExactDenoiser pretrained(landscape.p_data());

  {
    const auto start = std::chrono::steady_clock::now();
    RandomSource rng = root.substream(20);
    const auto samples = draw_unguided(pretrained, config.k, rng);
    rows.push_back({"unguided", seed, metrics(samples, landscape, pool), 0, seconds_since(start)});
  }

  auto guided_arm = [&](const std::string& name, const TimePredictorPtr& p, double gamma,
                        std::uint64_t stream, double setup_time) {
    const auto start = std::chrono::steady_clock::now();
    GuidanceConfig cfg;
    cfg.mode = GuidanceMode::kDeg;
    cfg.gamma = gamma;
    cfg.predictor = p;
    SamplerDiagnostics diag;
    RandomSource rng = root.substream(stream);
    std::vector<TokenSequence> samples;
    for (std::size_t i = 0; i < config.k; ++i) {
      RandomSource chain = rng.substream(i);
      samples.push_back(aoarm_sample(pretrained, cfg, chain, &diag).sequence);
    }
    rows.push_back({name, seed, metrics(samples, landscape, pool), diag.predictor_calls,
                    seconds_since(start) + setup_time});
  };

  for (std::size_t g = 0; g < config.gammas.size(); ++g) {
    guided_arm(gamma_arm(config.gammas[g]), predictor, config.gammas[g], 30 + g, classifier_time);
  }
  if (config.exact_arm) {
    const auto start = std::chrono::steady_clock::now();
    auto target = CleanPredictor(length, s, [&landscape](const TokenSequence& x) {
      return landscape.in_target(x) ? 1.0 : 0.0;
    });
    auto exact = exact_marginal_predictor(target, landscape.p_data());
    guided_arm("guided_exact", exact, 1.0, 40, seconds_since(start));
  }
  {
    RandomSource rng = root.substream(50);
    ArmResult r = run_posthoc_filter(pretrained, *predictor, config.filter_pool, config.k,
                                     landscape, pool, rng);
    r.seed = seed;
    r.wall_time += classifier_time;
    rows.push_back(r);
  }
  for (std::size_t q = 0; q < config.refit_fractions.size(); ++q) {
    RandomSource rng = root.substream(60 + q);
    ArmResult r = run_refit_baseline(pool, config.refit_fractions[q], config.k, config.refit_steps,
                                     landscape, rng);
    r.seed = seed;
    rows.push_back(r);
  }
  return rows;
}

CampaignReport run_campaign(const CampaignConfig& config) {
  const Landscape landscape = make_landscape(config.landscape);
  CampaignReport report;
  report.landscape_summary = {{"spec", config.landscape.to_json()},
                              {"threshold", landscape.threshold()},
                              {"target_mass", landscape.target_mass()},
                              {"target_size", landscape.target_size()}};

  std::vector<std::vector<ArmResult>> per_seed(config.seeds.size());
  const unsigned threads = std::max(1u, config.threads);
  if (threads == 1) {
    for (std::size_t i = 0; i < config.seeds.size(); ++i) {
      per_seed[i] = run_campaign_seed(config, landscape, config.seeds[i]);
    }
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < config.seeds.size(); i += threads) {
            per_seed[i] = run_campaign_seed(config, landscape, config.seeds[i]);
          }
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  for (auto& rows : per_seed) {
    for (auto& r : rows) report.rows.push_back(std::move(r));
  }
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const auto& a, const auto& b) {
    return a.arm != b.arm ? a.arm < b.arm : a.seed < b.seed;
  });
  return report;
}

}  // namespace guidesampler
