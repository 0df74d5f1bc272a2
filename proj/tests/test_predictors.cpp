#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <vector>

#include "guidesampler/bench.hpp"
#include "guidesampler/denoiser.hpp"
#include "guidesampler/errors.hpp"
#include "guidesampler/oracle.hpp"
#include "guidesampler/predictors.hpp"

using namespace guidesampler;

namespace {

std::shared_ptr<const TabularDistribution> three_words() {
  std::vector<TokenSequence> support{parse_sequence("AA", 2), parse_sequence("AB", 2), parse_sequence("BB", 2)};
  return std::make_shared<const TabularDistribution>(TabularDistribution::uniform_over(support));
}

std::shared_ptr<const TabularDistribution> random_gibbs(int length, int s, std::uint64_t seed) {
  RandomSource rng(seed);
  return std::make_shared<const TabularDistribution>(
      gibbs_distribution(PottsEnergy::random(length, s, 1.0, 0.5, rng)));
}

CleanPredictor random_clean(int length, int s, RandomSource& rng) {
  std::vector<double> v(static_cast<std::size_t>(state_count(length, s)));
  for (double& x : v) x = rng.uniform();
  return CleanPredictor::tabulated(length, s, v);
}

MaskedSequence random_masked(int length, int s, RandomSource& rng) {
  MaskedSequence x = MaskedSequence::fully_masked(length, s);
  for (int d = 0; d < length; ++d) {
    if (rng.bernoulli(0.5)) x.set(d, static_cast<Token>(rng.uniform_index(static_cast<std::uint64_t>(s))));
  }
  return x;
}

PottsClassifier random_classifier(int length, int s, PottsClassifier::Link link, bool pairwise,
                                  RandomSource& rng) {
  PottsClassifier c(length, s, link, pairwise);
  c.bias() = rng.normal();
  for (double& v : c.field_params()) v = rng.normal();
  for (double& v : c.coupling_params()) v = 0.5 * rng.normal();
  return c;
}

}  // namespace

TEST_CASE("exact marginal predictor") {
  const auto p = three_words();
  const CleanPredictor clean(2, 2, [](const TokenSequence& x) {
    return (x == parse_sequence("AA", 2) ? 0.9 : 0.0) + 0.1;
  });
  const auto pred = exact_marginal_predictor(clean, p);
  CHECK(pred->likelihood(parse_masked("A?", 2)) == doctest::Approx(0.55).epsilon(1e-12));
  CHECK(pred->likelihood(parse_masked("??", 2)) == doctest::Approx((1.0 + 0.1 + 0.1) / 3.0).epsilon(1e-12));
  CHECK(pred->likelihood(parse_masked("AB", 2)) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK_THROWS_AS(pred->expectation(parse_masked("BA", 2)), UnsupportedContext);

  const auto flat = exact_marginal_predictor(CleanPredictor::constant(2, 2, 0.3), p);
  for (const char* x : {"??", "A?", "?B", "BB"}) CHECK(flat->likelihood(parse_masked(x, 2)) == doctest::Approx(0.3));
}

TEST_CASE("exact marginal predictor is a martingale under unmasking") {
  RandomSource rng(3);
  const auto p = random_gibbs(4, 3, 4);
  const CleanPredictor clean = random_clean(4, 3, rng);
  const auto pred = exact_marginal_predictor(clean, p);
  const ExactDenoiser den(p);
  for (int n = 0; n < 50; ++n) {
    const MaskedSequence x = random_masked(4, 3, rng);
    if (x.is_clean()) continue;
    const auto post = den.posterior(x);
    for (int d : x.masked_positions()) {
      double refined = 0.0;
      for (Token s = 0; s < 3; ++s) {
        if (post(d, s) > 0.0) refined += post(d, s) * pred->expectation(x.with(d, s));
      }
      CHECK(std::abs(refined - pred->expectation(x)) <= 1e-9);
    }
  }
  for (std::uint64_t i = 0; i < 81; ++i) {
    const TokenSequence x = decode_index(i, 4, 3);
    CHECK(std::abs(pred->likelihood(MaskedSequence(x)) - clamp_likelihood(clean(x))) <= 1e-9);
  }
}

TEST_CASE("likelihoods are clamped") {
  CHECK(clamp_likelihood(0.0) == kLikelihoodFloor);
  CHECK(clamp_likelihood(1.0) == 1.0);
  const auto zero = exact_marginal_predictor(CleanPredictor::constant(2, 2, 0.0), three_words());
  CHECK(zero->likelihood(parse_masked("??", 2)) == kLikelihoodFloor);
  CHECK_THROWS_AS(CleanPredictor(1, 2, [](const TokenSequence&) { return 1.5; })(parse_sequence("A", 2)),
                  DomainError);
}

TEST_CASE("product-of-marginals predictor") {
  RandomSource rng(5);
  const auto p = random_gibbs(2, 3, 6);
  const auto den = std::make_shared<ExactDenoiser>(p);
  const CleanPredictor clean = random_clean(2, 3, rng);
  const ProductOfMarginalsPredictor pom(clean, den, 1, 99);
  CHECK(pom.likelihood(parse_masked("CA", 3)) == clamp_likelihood(clean(parse_sequence("CA", 3))));

  const ProductOfMarginalsPredictor flat(CleanPredictor::constant(2, 3, 0.4), den, 3, 1);
  CHECK(flat.likelihood(parse_masked("??", 3)) == doctest::Approx(0.4));

  const MaskedSequence x = parse_masked("??", 3);
  const int n = 40000;
  double sum = 0.0;
  double sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = pom.likelihood(x, rng);
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum2 / n - mean * mean) / n);
  CHECK(std::abs(mean - pom.exact_expectation(x)) <= 3 * se);
  CHECK(pom.likelihood(x) == pom.likelihood(x));
}

TEST_CASE("threshold likelihood") {
  CHECK(threshold_likelihood(1.0, 0.5, 1.0) == doctest::Approx(0.5));
  CHECK(threshold_likelihood(1.0 + 3 * 0.2, 0.2, 1.0) == doctest::Approx(0.99865).epsilon(1e-5));
  CHECK(threshold_likelihood(5.0, 1e12, 1.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(threshold_likelihood(0.0, 0.0, 1.0), DomainError);
  const ThresholdPredictor t(2, 2, [](const MaskedSequence&) { return 2.0; },
                             [](const MaskedSequence&) { return 1.0; }, 2.0);
  CHECK(t.likelihood(parse_masked("?A", 2)) == doctest::Approx(0.5));
}

TEST_CASE("product predictor") {
  const auto p = three_words();
  const auto a = exact_marginal_predictor(CleanPredictor::constant(2, 2, 0.5), p);
  const auto b = exact_marginal_predictor(CleanPredictor::constant(2, 2, 0.2), p);
  const ProductPredictor one({a});
  const ProductPredictor two({a, b});
  CHECK(one.likelihood(parse_masked("A?", 2)) == a->likelihood(parse_masked("A?", 2)));
  CHECK(two.likelihood(parse_masked("A?", 2)) == doctest::Approx(0.1));
  CHECK_FALSE(two.has_gradient());
  CHECK_THROWS_AS(two.gradient_surface(parse_masked("A?", 2)), CapabilityError);
  CHECK_THROWS_AS(ProductPredictor({}), DomainError);

  RandomSource rng(7);
  const auto c1 = std::make_shared<PottsClassifier>(random_classifier(3, 2, PottsClassifier::Link::kLogistic, true, rng));
  const auto c2 = std::make_shared<PottsClassifier>(random_classifier(3, 2, PottsClassifier::Link::kLogistic, false, rng));
  const ProductPredictor both({c1, c2});
  REQUIRE(both.has_gradient());
  const MaskedSequence x = parse_masked("A?B", 2);
  const auto g = both.gradient_surface(x);
  const auto g1 = c1->gradient_surface(x);
  const auto g2 = c2->gradient_surface(x);
  for (int d = 0; d < 3; ++d) {
    for (Token s = 0; s <= 2; ++s) CHECK(g(d, s) == doctest::Approx(g1(d, s) + g2(d, s)));
  }
}

TEST_CASE("classifier gradient matches finite differences") {
  RandomSource rng(8);
  for (auto link : {PottsClassifier::Link::kLogistic, PottsClassifier::Link::kLogLinear}) {
    const PottsClassifier c = random_classifier(4, 3, link, true, rng);
    double worst = 0.0;
    for (int n = 0; n < 100; ++n) {
      const MaskedSequence x = random_masked(4, 3, rng);
      std::vector<double> onehot(4 * 4, 0.0);
      for (int d = 0; d < 4; ++d) onehot[static_cast<std::size_t>(d * 4 + x[d])] = 1.0;
      const auto g = c.gradient_surface(x);
      for (int d = 0; d < 4; ++d) {
        for (Token s = 0; s <= 3; ++s) {
          auto up = onehot;
          auto down = onehot;
          const double h = 1e-6;
          up[static_cast<std::size_t>(d * 4 + s)] += h;
          down[static_cast<std::size_t>(d * 4 + s)] -= h;
          const double fd = (c.log_likelihood_relaxed(up) - c.log_likelihood_relaxed(down)) / (2 * h);
          worst = std::max(worst, std::abs(fd - g(d, s)));
        }
      }
    }
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("first-order ratio is exact for affine log-likelihoods") {
  RandomSource rng(9);
  PottsClassifier c(4, 3, PottsClassifier::Link::kLogLinear, false);
  c.bias() = -0.2;
  for (double& v : c.field_params()) v = -std::abs(rng.normal());
  for (int n = 0; n < 50; ++n) {
    const MaskedSequence x = random_masked(4, 3, rng);
    const auto g = c.gradient_surface(x);
    for (int d : x.masked_positions()) {
      for (Token s = 0; s < 3; ++s) {
        const double direct = std::log(c.likelihood(x.with(d, s))) - std::log(c.likelihood(x));
        CHECK(std::abs(g.log_ratio(x, d, s) - direct) <= 1e-10);
      }
    }
  }
}

TEST_CASE("classifier JSON round-trip") {
  RandomSource rng(10);
  const PottsClassifier c = random_classifier(3, 3, PottsClassifier::Link::kLogistic, true, rng);
  const PottsClassifier d = PottsClassifier::from_json(nlohmann::json::parse(c.to_json().dump()));
  const MaskedSequence x = parse_masked("?CA", 3);
  CHECK(c.likelihood(x) == d.likelihood(x));
}

TEST_CASE("noisy classifier training") {
  SUBCASE("separable single-site data") {
    std::vector<LabeledSequence> data;
    for (int n = 0; n < 20; ++n) {
      data.push_back({parse_sequence("A", 2), 1.0});
      data.push_back({parse_sequence("B", 2), 0.0});
    }
    RandomSource rng(11);
    const auto c = train_noisy_classifier(data, ClassifierTrainingOptions{}, rng);
    CHECK(c.likelihood(parse_masked("A", 2)) > 0.5);
    CHECK(c.likelihood(parse_masked("B", 2)) < 0.5);
  }

  SUBCASE("single class is rejected") {
    std::vector<LabeledSequence> data{{parse_sequence("AB", 2), 1.0}, {parse_sequence("BB", 2), 1.0}};
    RandomSource rng(12);
    CHECK_THROWS_AS(train_noisy_classifier(data, ClassifierTrainingOptions{}, rng), DomainError);
  }

  SUBCASE("planted linear signal is recovered") {
    RandomSource rng(13);
    const int length = 6;
    const int s = 3;
    std::vector<double> w(static_cast<std::size_t>(length * s));
    for (double& v : w) v = 1.5 * rng.normal();
    auto draw = [&](std::size_t n) {
      std::vector<LabeledSequence> out;
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<Token> t(static_cast<std::size_t>(length));
        double z = 0.0;
        for (int d = 0; d < length; ++d) {
          t[static_cast<std::size_t>(d)] = static_cast<Token>(rng.uniform_index(s));
          z += w[static_cast<std::size_t>(d * s + t[static_cast<std::size_t>(d)])];
        }
        out.push_back({TokenSequence(t, s), z > 0.0 ? 1.0 : 0.0});
      }
      return out;
    };
    const auto train = draw(1000);
    const auto test = draw(1000);
    const auto c = train_noisy_classifier(train, ClassifierTrainingOptions{}, rng);
    std::vector<double> scores;
    std::vector<bool> labels;
    for (const auto& e : test) {
      scores.push_back(c.likelihood(MaskedSequence(e.sequence)));
      labels.push_back(e.label >= 0.5);
    }
    CHECK(auroc(scores, labels) >= 0.9);
  }
}

TEST_CASE("labeled CSV") {
  const auto path = std::filesystem::temp_directory_path() / "guidesampler_labels.csv";
  {
    std::ofstream out(path);
    out << "sequence,label\nAB,true\nBB,0\nBA,0.75\n";
  }
  const auto data = load_labeled_csv(path.string(), 2);
  REQUIRE(data.size() == 3);
  CHECK(data[0].label == 1.0);
  CHECK(data[2].sequence == parse_sequence("BA", 2));
  CHECK(data[2].label == 0.75);
  {
    std::ofstream out(path);
    out << "AB,maybe\n";
  }
  CHECK_THROWS_AS(load_labeled_csv(path.string(), 2), ConfigError);
  std::filesystem::remove(path);
}
