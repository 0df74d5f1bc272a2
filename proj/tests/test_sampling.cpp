#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "guidesampler/bench.hpp"
#include "guidesampler/denoiser.hpp"
#include "guidesampler/errors.hpp"
#include "guidesampler/oracle.hpp"
#include "guidesampler/sampling.hpp"

using namespace guidesampler;

namespace {

const InterpolationSchedule kUniform = InterpolationSchedule::uniform();

std::shared_ptr<const TabularDistribution> random_gibbs(int length, int s, std::uint64_t seed) {
  RandomSource rng(seed);
  return std::make_shared<const TabularDistribution>(
      gibbs_distribution(PottsEnergy::random(length, s, 1.0, 0.5, rng)));
}

CleanPredictor random_clean(int length, int s, RandomSource& rng) {
  std::vector<double> v(static_cast<std::size_t>(state_count(length, s)));
  for (double& x : v) x = 0.05 + 0.9 * rng.uniform();
  return CleanPredictor::tabulated(length, s, v);
}

// 0.4 on the masked input, 0.8 once position 0 reads A, 0.2 otherwise.
class StepPredictor final : public TimePredictor {
 public:
  int length() const override { return 1; }
  int alphabet_size() const override { return 2; }
  double likelihood(const MaskedSequence& x) const override {
    if (x.is_masked(0)) return 0.4;
    return x[0] == 0 ? 0.8 : 0.2;
  }
};

class NullDenoiser final : public Denoiser {
 public:
  int length() const override { return 2; }
  int alphabet_size() const override { return 2; }
  void position_posterior(const MaskedSequence&, int, std::span<double> out) const override {
    for (double& v : out) v = 0.0;
  }
};

EmpiricalDistribution collect(const std::vector<SampleResult>& results, int length, int s) {
  EmpiricalDistribution emp(length, s);
  for (const auto& r : results) emp.add(r.sequence);
  return emp;
}

std::vector<SampleResult> aoarm_chains(const Denoiser& den, const GuidanceConfig& cfg, std::size_t n,
                                       std::uint64_t seed, SamplerDiagnostics* diag = nullptr) {
  return run_chains(
      n, seed, 1, [&](RandomSource& rng, SamplerDiagnostics& d) { return aoarm_sample(den, cfg, rng, &d); }, diag);
}

std::vector<SampleResult> euler_chains(const Denoiser& den, const GuidanceConfig& cfg, double dt,
                                       std::size_t n, std::uint64_t seed, SamplerDiagnostics* diag = nullptr) {
  return run_chains(
      n, seed, 1,
      [&](RandomSource& rng, SamplerDiagnostics& d) { return euler_sample(den, cfg, kUniform, dt, rng, &d); },
      diag);
}

}  // namespace

TEST_CASE("unguided rates") {
  const auto p = std::make_shared<const TabularDistribution>(TabularDistribution::uniform(2, 2));
  const ExactDenoiser den(p);
  const RateSet half = unguided_rates(den, parse_masked("?A", 2), 0.5, kUniform);
  REQUIRE(half.entries.size() == 2);
  CHECK(half.rate(0, 0) == doctest::Approx(1.0));
  CHECK(half.rate(0, 1) == doctest::Approx(1.0));
  CHECK(half.rate(1, 0) == 0.0);

  const RateSet start = unguided_rates(den, parse_masked("??", 2), 0.0, kUniform);
  CHECK(start.rate(1, 1) == 0.5);
  CHECK(start.total() == doctest::Approx(2.0));
  CHECK(unguided_rates(den, parse_masked("AB", 2), 0.3, kUniform).entries.empty());
  CHECK_THROWS_AS(unguided_rates(den, parse_masked("??", 2), 1.0 - 1e-10, kUniform), DomainError);
}

TEST_CASE("exact rate guidance") {
  const auto p = std::make_shared<const TabularDistribution>(TabularDistribution::uniform(1, 2));
  const ExactDenoiser den(p);
  const RateSet base = unguided_rates(den, parse_masked("?", 2), 0.5, kUniform);
  GuidanceConfig cfg;
  cfg.mode = GuidanceMode::kExact;
  cfg.predictor = std::make_shared<StepPredictor>();
  SamplerDiagnostics diag;
  const RateSet guided = guide_rates(base, cfg, &diag);
  CHECK(guided.rate(0, 0) == doctest::Approx(2.0));
  CHECK(guided.rate(0, 1) == doctest::Approx(0.5));
  CHECK(diag.predictor_calls == 3);

  cfg.gamma = 0.0;
  const RateSet same = guide_rates(base, cfg);
  for (std::size_t k = 0; k < base.entries.size(); ++k) CHECK(same.entries[k].rate == base.entries[k].rate);

  cfg.gamma = 1.0;
  cfg.mode = GuidanceMode::kTag;
  CHECK_THROWS_AS(cfg.validate(1, 2), CapabilityError);
  CHECK_THROWS_AS(guide_rates(base, cfg), CapabilityError);
}

TEST_CASE("tag equals exact guidance for affine log-likelihoods") {
  RandomSource rng(2);
  const auto c = std::make_shared<PottsClassifier>(4, 3, PottsClassifier::Link::kLogLinear, false);
  c->bias() = -0.1;
  for (double& v : c->field_params()) v = -std::abs(rng.normal());
  const ParametricDenoiser den = ParametricDenoiser::random(4, 3, 1.0, rng);
  GuidanceConfig exact;
  exact.mode = GuidanceMode::kExact;
  exact.gamma = 2.0;
  exact.predictor = c;
  GuidanceConfig tag = exact;
  tag.mode = GuidanceMode::kTag;
  for (const char* x : {"????", "A?C?", "?BB?", "CAB?"}) {
    const RateSet base = unguided_rates(den, parse_masked(x, 3), 0.3, kUniform);
    const RateSet a = guide_rates(base, exact);
    SamplerDiagnostics diag;
    const RateSet b = guide_rates(base, tag, &diag);
    CHECK(diag.gradient_calls == 1);
    for (std::size_t k = 0; k < a.entries.size(); ++k) {
      CHECK(std::abs(a.entries[k].rate - b.entries[k].rate) <= 1e-9 * a.entries[k].rate);
    }
  }
}

TEST_CASE("predictor-free rates") {
  const auto p = random_gibbs(2, 2, 3);
  const auto q = random_gibbs(2, 2, 4);
  const RateSet u = unguided_rates(ExactDenoiser(p), parse_masked("?A", 2), 0.2, kUniform);
  const RateSet c = unguided_rates(ExactDenoiser(q), parse_masked("?A", 2), 0.2, kUniform);
  const RateSet g0 = predictor_free_rates(c, u, 0.0);
  const RateSet g1 = predictor_free_rates(c, u, 1.0);
  const RateSet mid = predictor_free_rates(c, u, 0.5);
  for (std::size_t k = 0; k < u.entries.size(); ++k) {
    CHECK(g0.entries[k].rate == u.entries[k].rate);
    CHECK(g1.entries[k].rate == c.entries[k].rate);
    CHECK(mid.entries[k].rate == doctest::Approx(std::sqrt(u.entries[k].rate * c.entries[k].rate)));
  }
}

TEST_CASE("guidance config validation") {
  GuidanceConfig cfg;
  cfg.eta = 0.5;
  CHECK_THROWS_AS(cfg.validate(2, 2), UnsupportedFeature);
  cfg.eta = 0.0;
  cfg.mode = GuidanceMode::kDeg;
  CHECK_THROWS_AS(cfg.validate(2, 2), ConfigError);
  cfg.predictor = std::make_shared<StepPredictor>();
  CHECK_THROWS_AS(cfg.validate(2, 2), ConfigError);
  CHECK_NOTHROW(cfg.validate(1, 2));
  cfg.mode = GuidanceMode::kPredictorFree;
  CHECK_THROWS_AS(cfg.validate(1, 2), ConfigError);
  CHECK_THROWS_AS(parse_guidance_mode("strong"), ConfigError);
  CHECK(parse_guidance_mode("deg") == GuidanceMode::kDeg);

  GuidanceConfig staged;
  staged.mode = GuidanceMode::kDeg;
  staged.predictor = std::make_shared<StepPredictor>();
  staged.switch_time = 0.4;
  CHECK(staged.active_predictor(0.2) == nullptr);
  CHECK(staged.active_predictor(0.5) == staged.predictor.get());
}

TEST_CASE("lemma1 density") {
  CHECK(lemma1_density(1, 0.3, 0.0, 1, kUniform) == doctest::Approx(1.0));
  CHECK(lemma1_density(1, 0.9, 0.0, 1, kUniform) == doctest::Approx(1.0));
  CHECK(lemma1_density(1, 0.5, 0.0, 2, kUniform) == doctest::Approx(1.0));
  CHECK(lemma1_density(1, 0.25, 0.0, 2, kUniform) == doctest::Approx(2 * 0.75));
  CHECK_THROWS_AS(lemma1_density(2, 0.3, 0.5, 3, kUniform), DomainError);
}

TEST_CASE("jump times") {
  RandomSource rng(5);
  std::vector<double> one;
  for (int n = 0; n < 100000; ++n) one.push_back(sample_jump_times(1, kUniform, rng).times[0]);
  CHECK(ks_uniform(one).pass);

  double sum = 0.0;
  for (int n = 0; n < 100000; ++n) {
    const JumpTimes j = sample_jump_times(3, kUniform, rng);
    CHECK(std::is_sorted(j.times.begin(), j.times.end()));
    sum += j.times[0];
  }
  CHECK(std::abs(sum / 100000 - 0.25) <= 0.005);

  std::vector<std::uint64_t> counts(6, 0);
  for (int n = 0; n < 60000; ++n) {
    const auto o = sample_jump_times(3, kUniform, rng).order;
    ++counts[static_cast<std::size_t>(o[0] * 2 + (o[1] > o[2] ? 1 : 0))];
  }
  CHECK(chi_square_gof(counts, std::vector<double>(6, 1.0 / 6.0)).pass);
}

TEST_CASE("decode paths") {
  const auto p = random_gibbs(4, 3, 6);
  const ExactDenoiser den(p);
  RandomSource rng(7);
  for (const SampleResult& r : {aoarm_sample(den, GuidanceConfig{}, rng),
                                euler_sample(den, GuidanceConfig{}, kUniform, 0.05, rng)}) {
    REQUIRE(r.path.states.size() == 5);
    CHECK(r.path.states.front().masked_count() == 4);
    CHECK(r.path.states.back() == MaskedSequence(r.sequence));
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(r.path.states[i + 1].masked_count() == r.path.states[i].masked_count() - 1);
      CHECK(r.path.states[i].is_masked(r.path.order[i]));
      CHECK_FALSE(r.path.states[i + 1].is_masked(r.path.order[i]));
    }
    CHECK(std::is_sorted(r.path.jump_times.begin(), r.path.jump_times.end()));
    const auto j = r.path.to_json();
    CHECK(j["states"].size() == 5);
  }
}

TEST_CASE("point mass is always reproduced") {
  const auto p = std::make_shared<const TabularDistribution>(TabularDistribution::point_mass(parse_sequence("CAB", 3)));
  const ExactDenoiser den(p);
  RandomSource rng(8);
  for (int n = 0; n < 200; ++n) {
    CHECK(euler_sample(den, GuidanceConfig{}, kUniform, 0.1, rng).sequence == parse_sequence("CAB", 3));
    CHECK(aoarm_sample(den, GuidanceConfig{}, rng).sequence == parse_sequence("CAB", 3));
  }
  CHECK_THROWS_AS(euler_sample(den, GuidanceConfig{}, kUniform, 0.2, rng), DomainError);
}

TEST_CASE("unguided samplers reproduce p_data") {
  const auto p3 = random_gibbs(3, 2, 9);
  const ExactDenoiser den3(p3);
  SamplerDiagnostics diag;
  const auto eu = collect(euler_chains(den3, GuidanceConfig{}, 0.001, 200000, 10, &diag), 3, 2);
  CHECK(tv_distance(eu, *p3) <= 0.02);

  const auto p4 = random_gibbs(4, 3, 11);
  const ExactDenoiser den4(p4);
  const auto ao = collect(aoarm_chains(den4, GuidanceConfig{}, 200000, 12), 4, 3);
  CHECK(tv_distance(ao, *p4) <= 0.02);
  CHECK(chi_square_gof(ao, *p4).pass);
}

TEST_CASE("Euler bias shrinks with the step") {
  const auto p = random_gibbs(3, 2, 13);
  const ExactDenoiser den(p);
  double coarse = 0.0;
  double fine = 0.0;
  SamplerDiagnostics diag;
  for (std::uint64_t k = 0; k < 5; ++k) {
    coarse += tv_distance(collect(euler_chains(den, GuidanceConfig{}, 0.1, 50000, 100 + k, &diag), 3, 2), *p);
    fine += tv_distance(collect(euler_chains(den, GuidanceConfig{}, 0.01, 50000, 200 + k), 3, 2), *p);
  }
  CHECK(coarse > fine);
  CHECK(diag.forced_unmasks > 0);
}

TEST_CASE("guided sampling targets the tilted posterior") {
  RandomSource rng(14);
  const auto p = random_gibbs(3, 3, 15);
  const CleanPredictor clean = random_clean(3, 3, rng);
  const ExactDenoiser den(p);
  GuidanceConfig cfg;
  cfg.mode = GuidanceMode::kDeg;
  cfg.predictor = exact_marginal_predictor(clean, p);
  const auto posterior = brute_force_posterior(*p, clean, 1.0);
  SamplerDiagnostics diag;
  CHECK(tv_distance(collect(aoarm_chains(den, cfg, 100000, 16, &diag), 3, 3), posterior) <= 0.02);
  CHECK(diag.predictor_calls <= 100000u * 3 * 3);

  SUBCASE("exact-rate Euler") {
    cfg.mode = GuidanceMode::kExact;
    CHECK(tv_distance(collect(euler_chains(den, cfg, 0.002, 20000, 17), 3, 3), posterior) <= 0.03);
  }
  SUBCASE("gamma = 0 is unguided") {
    cfg.gamma = 0.0;
    const auto emp = collect(aoarm_chains(den, cfg, 100000, 18), 3, 3);
    CHECK(chi_square_gof(emp, *p).pass);
  }
}

TEST_CASE("stronger guidance raises the predictor mean") {
  RandomSource rng(20);
  const auto p = random_gibbs(4, 3, 21);
  const CleanPredictor clean = random_clean(4, 3, rng);
  const ExactDenoiser den(p);
  GuidanceConfig cfg;
  cfg.mode = GuidanceMode::kDeg;
  cfg.predictor = exact_marginal_predictor(clean, p);
  std::vector<std::vector<double>> means;
  for (double gamma : {0.0, 1.0, 10.0}) {
    cfg.gamma = gamma;
    std::vector<double> v;
    for (const auto& r : aoarm_chains(den, cfg, 5000, 22 + static_cast<std::uint64_t>(gamma))) v.push_back(clean(r.sequence));
    means.push_back(v);
  }
  CHECK(mean_greater_test(means[1], means[0]).pass);
  CHECK(mean_greater_test(means[2], means[1]).pass);
}

TEST_CASE("predictor-free guidance at gamma = 1 samples the conditional model") {
  const auto p = random_gibbs(3, 2, 23);
  const auto q = random_gibbs(3, 2, 24);
  const ExactDenoiser den(p);
  GuidanceConfig cfg;
  cfg.mode = GuidanceMode::kPredictorFree;
  cfg.conditional_denoiser = std::make_shared<ExactDenoiser>(q);
  CHECK(tv_distance(collect(aoarm_chains(den, cfg, 100000, 25), 3, 2), *q) <= 0.02);
  CHECK(tv_distance(collect(euler_chains(den, cfg, 0.002, 50000, 26), 3, 2), *q) <= 0.03);
}

TEST_CASE("degenerate steps are reported") {
  RandomSource rng(27);
  try {
    aoarm_sample(NullDenoiser{}, GuidanceConfig{}, rng);
    FAIL("expected a degenerate step");
  } catch (const DegenerateStep& e) {
    CHECK(e.step() == 0);
  }
}

TEST_CASE("chains do not depend on the thread count") {
  const auto p = random_gibbs(4, 3, 28);
  const ExactDenoiser den(p);
  const ChainFn chain = [&](RandomSource& rng, SamplerDiagnostics& d) {
    return euler_sample(den, GuidanceConfig{}, kUniform, 0.05, rng, &d);
  };
  SamplerDiagnostics d1;
  SamplerDiagnostics d3;
  const auto a = run_chains(300, 29, 1, chain, &d1);
  const auto b = run_chains(300, 29, 3, chain, &d3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].sequence == b[i].sequence);
    CHECK(a[i].path.jump_times == b[i].path.jump_times);
  }
  CHECK(d1.to_json() == d3.to_json());
}
