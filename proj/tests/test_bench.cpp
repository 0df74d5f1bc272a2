#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "guidesampler/bench.hpp"
#include "guidesampler/errors.hpp"
#include "guidesampler/oracle.hpp"

using namespace guidesampler;

namespace {

LandscapeSpec small_spec(double target_mass) {
  LandscapeSpec s;
  s.length = 4;
  s.alphabet_size = 4;
  s.target_mass = target_mass;
  return s;
}

CampaignConfig small_campaign() {
  CampaignConfig c;
  c.landscape = small_spec(0.01);
  c.n_labeled = 200;
  c.k = 20;
  c.filter_pool = 200;
  c.gammas = {1.0};
  c.refit_fractions = {0.1};
  c.exact_arm = false;
  c.seeds = {1, 2, 3};
  c.classifier_epochs = 50;
  c.refit_steps = 200;
  return c;
}

}  // namespace

TEST_CASE("zero energies give a uniform p_data") {
  PottsEnergy e;
  e.length = 3;
  e.alphabet_size = 3;
  e.single.assign(9, 0.0);
  e.pair.assign(81, 0.0);
  CHECK(tv_distance(gibbs_distribution(e), TabularDistribution::uniform(3, 3)) <= 1e-15);
}

TEST_CASE("default landscape target") {
  const Landscape l = make_landscape(LandscapeSpec{});
  CHECK(l.p_data()->size() == 65536);
  CHECK(l.target_mass() >= 0.0005);
  CHECK(l.target_mass() <= 0.002);
  CHECK(l.target_mass() <= 1e-3);
  double mass = 0.0;
  for (std::uint64_t i = 0; i < l.p_data()->size(); ++i) {
    if (l.in_target(decode_index(i, 8, 4))) mass += l.p_data()->probability(i);
  }
  CHECK(mass == doctest::Approx(l.target_mass()).epsilon(1e-9));
}

TEST_CASE("landscape serialization round-trips") {
  LandscapeSpec spec = small_spec(0.05);
  spec.axes = 2;
  const Landscape a = make_landscape(spec);
  const Landscape b = Landscape::from_json(nlohmann::json::parse(a.to_json().dump()));
  CHECK(tv_distance(*a.p_data(), *b.p_data()) == 0.0);
  CHECK(a.threshold() == b.threshold());
  for (std::uint64_t i = 0; i < 256; ++i) {
    const TokenSequence x = decode_index(i, 4, 4);
    CHECK(a.score(x) == b.score(x));
    CHECK(a.fitness(x, 1) == b.fitness(x, 1));
  }
  CHECK(LandscapeSpec::from_json(spec.to_json()).to_json() == spec.to_json());
  CHECK_THROWS_AS(LandscapeSpec::from_json(nlohmann::json{{"D", 4}, {"colour", 1}}), ConfigError);
}

TEST_CASE("landscape size cap") {
  LandscapeSpec spec;
  spec.length = 9;
  CHECK_THROWS_AS(make_landscape(spec), SizeError);
}

TEST_CASE("metrics") {
  const Landscape l = make_landscape(small_spec(0.05));
  const std::vector<TokenSequence> same(5, parse_sequence("ABCD", 4));
  CHECK(metrics(same, l, same).diversity == 0.0);
  CHECK(metrics(same, l, same).novelty == 0.0);

  const std::vector<TokenSequence> pair{parse_sequence("AAAA", 4), parse_sequence("BBAA", 4)};
  CHECK(metrics(pair, l, pair).diversity == 2.0);
  const std::vector<TokenSequence> ref{parse_sequence("ABAA", 4)};
  CHECK(metrics(pair, l, ref).novelty == 1.0);
  CHECK(hamming(parse_sequence("AA", 2), parse_sequence("BB", 2)) == 2);
}

TEST_CASE("post-hoc filter") {
  const Landscape l = make_landscape(small_spec(0.5));
  const ExactDenoiser den(l.p_data());
  const auto flat = exact_marginal_predictor(CleanPredictor::constant(4, 4, 0.5), l.p_data());
  std::vector<double> v(256);
  RandomSource fill(1);
  for (double& x : v) x = fill.uniform();
  const auto noisy = exact_marginal_predictor(CleanPredictor::tabulated(4, 4, v), l.p_data());
  const std::vector<TokenSequence> reference{parse_sequence("AAAA", 4)};

  RandomSource r1(2);
  RandomSource r2(2);
  const ArmResult a = run_posthoc_filter(den, *flat, 300, 300, l, reference, r1);
  const ArmResult b = run_posthoc_filter(den, *noisy, 300, 300, l, reference, r2);
  CHECK(a.metrics.success_rate == b.metrics.success_rate);
  CHECK(a.metrics.diversity == b.metrics.diversity);

  RandomSource r3(3);
  const ArmResult c = run_posthoc_filter(den, *flat, 1000, 100, l, reference, r3);
  const double m = l.target_mass();
  CHECK(std::abs(c.metrics.success_rate - m) <= 3 * std::sqrt(m * (1 - m) / 100));
  CHECK(c.n_oracle_calls == 1000);
  CHECK_THROWS_AS(run_posthoc_filter(den, *flat, 10, 11, l, reference, r3), DomainError);
}

TEST_CASE("refit baseline") {
  const Landscape l = make_landscape(small_spec(0.01));
  RandomSource rng(4);
  const auto pool = draw_labeled_pool(l, 50, rng);
  for (const auto& x : pool) CHECK_FALSE(l.in_target(x));
  const ArmResult all = run_refit_baseline(pool, 1.0, 30, 200, l, rng);
  CHECK(all.arm == "refit_q1");
  CHECK(all.metrics.success_rate >= 0.0);
  CHECK_THROWS_AS(run_refit_baseline(pool, 0.01, 30, 200, l, rng), DomainError);
}

TEST_CASE("campaign config is strict JSON") {
  const CampaignConfig c = small_campaign();
  CHECK(CampaignConfig::from_json(c.to_json()).to_json() == c.to_json());
  auto j = c.to_json();
  j["budget"] = 3;
  CHECK_THROWS_AS(CampaignConfig::from_json(j), ConfigError);
}

TEST_CASE("campaign rows and reruns") {
  const CampaignConfig c = small_campaign();
  const CampaignReport a = run_campaign(c);
  CHECK(a.rows.size() == 12);
  CHECK(a.arms() == std::vector<std::string>{"filter", "guided_g1", "refit_q0.1", "unguided"});
  const std::string csv = a.to_csv();
  CHECK(csv.rfind("arm,seed,success_rate,diversity,novelty,n_oracle_calls\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);

  CampaignConfig threaded = c;
  threaded.threads = 3;
  CHECK(run_campaign(threaded).to_csv() == csv);

  const auto summary = a.summary();
  CHECK(summary["arms"]["unguided"]["success_rate"].contains("ci_low"));
  const auto timing = a.timing("guided_g1");
  CHECK(timing["arms"]["guided_g1"]["matched"] == true);
}
