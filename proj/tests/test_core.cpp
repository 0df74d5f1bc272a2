#include <doctest.h>

#include <cmath>
#include <vector>

#include "guidesampler/errors.hpp"
#include "guidesampler/oracle.hpp"
#include "guidesampler/random.hpp"
#include "guidesampler/schedule.hpp"
#include "guidesampler/sequence.hpp"
#include "guidesampler/tabular.hpp"

using namespace guidesampler;

namespace {

TabularDistribution uniform_on(std::initializer_list<const char*> words, int s) {
  std::vector<TokenSequence> support;
  for (const char* w : words) support.push_back(parse_sequence(w, s));
  return TabularDistribution::uniform_over(support);
}

}  // namespace

TEST_CASE("alphabet puts the mask one past the real symbols") {
  Alphabet a(4);
  CHECK(a.mask() == 4);
  CHECK(a.is_real(3));
  CHECK_FALSE(a.is_real(4));
  CHECK(a.symbol(a.mask()) == '?');
  CHECK_THROWS_AS(Alphabet(1), DomainError);
}

TEST_CASE("clean sequences reject the mask") {
  CHECK_THROWS_AS(TokenSequence({0, 2}, 2), DomainError);
  CHECK_THROWS_AS(parse_sequence("A?", 2), DomainError);
  const MaskedSequence x = parse_masked("A?B", 2);
  CHECK(x.masked_positions() == std::vector<int>{1});
  CHECK(x.unmasked_positions() == std::vector<int>{0, 2});
  CHECK(to_string(x) == "A?B");
}

TEST_CASE("encode_index is little-endian mixed radix") {
  CHECK(encode_index(TokenSequence({0, 0}, 3)) == 0);
  CHECK(encode_index(TokenSequence({1, 2}, 3)) == 1 + 2 * 3);
  CHECK(decode_index(7, 2, 3) == TokenSequence({1, 2}, 3));
  for (std::uint64_t i = 0; i < 81; ++i) CHECK(encode_index(decode_index(i, 4, 3)) == i);
}

TEST_CASE("state_count refuses 64-bit overflow") {
  CHECK(state_count(8, 4) == 65536);
  CHECK_THROWS_AS(state_count(70, 2), SizeError);
}

TEST_CASE("schedules") {
  for (double a : {1.0, 2.0, 0.5}) {
    const auto k = a == 1.0 ? InterpolationSchedule::uniform() : InterpolationSchedule::power(a);
    CHECK(k.kappa(0.0) == 0.0);
    CHECK(k.kappa(1.0) == 1.0);
    double prev = 0.0;
    for (int i = 1; i < 1000; ++i) {
      const double t = i / 1000.0;
      const double h = 1e-7;
      const double fd = (k.kappa(t + h) - k.kappa(t - h)) / (2 * h);
      CHECK(std::abs(fd - k.kappa_dot(t)) <= 1e-6);
      CHECK(k.kappa(t) >= prev);
      prev = k.kappa(t);
      CHECK(k.inverse(k.kappa(t)) == doctest::Approx(t).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(InterpolationSchedule::uniform().kappa(1.5), DomainError);
  CHECK_THROWS_AS(InterpolationSchedule::power(0.0), DomainError);
}

TEST_CASE("mask_forward at the endpoints") {
  RandomSource rng(3);
  const TokenSequence x = parse_sequence("ABBA", 2);
  const auto k = InterpolationSchedule::uniform();
  CHECK(mask_forward(x, 0.0, k, rng).masked_count() == 4);
  CHECK(mask_forward(x, 1.0, k, rng) == MaskedSequence(x));
  CHECK_THROWS_AS(mask_forward(x, -0.1, k, rng), DomainError);
  CHECK_THROWS_AS(mask_forward(x, 1.1, k, rng), DomainError);
}

TEST_CASE("mask_forward keeps a kappa(t) fraction") {
  RandomSource rng(11);
  const TokenSequence x(std::vector<Token>(10000, 1), 2);
  const MaskedSequence m = mask_forward(x, 0.3, InterpolationSchedule::uniform(), rng);
  const double kept = 1.0 - m.masked_count() / 10000.0;
  CHECK(std::abs(kept - 0.3) <= 0.02);
}

TEST_CASE("masked counts are binomial") {
  RandomSource rng(12);
  const TokenSequence x(std::vector<Token>(8, 0), 3);
  const double t = 0.4;
  std::vector<std::uint64_t> counts(9, 0);
  for (int n = 0; n < 100000; ++n) {
    ++counts[static_cast<std::size_t>(mask_forward(x, t, InterpolationSchedule::uniform(), rng).masked_count())];
  }
  std::vector<double> expected(9);
  for (int m = 0; m <= 8; ++m) {
    expected[static_cast<std::size_t>(m)] =
        std::tgamma(9.0) / (std::tgamma(m + 1.0) * std::tgamma(9.0 - m)) * std::pow(0.6, m) * std::pow(0.4, 8 - m);
  }
  CHECK(chi_square_gof(counts, expected).pass);
}

TEST_CASE("consistent completions") {
  const auto p = uniform_on({"AA", "AB", "BB"}, 2);
  const auto c = consistent_completions(parse_masked("A?", 2), p);
  REQUIRE(c.size() == 2);
  CHECK(c[0].index == encode_index(parse_sequence("AA", 2)));
  CHECK(c[0].weight == doctest::Approx(0.5));
  CHECK(c[1].index == encode_index(parse_sequence("AB", 2)));
  CHECK(c[1].weight == doctest::Approx(0.5));

  const auto one = consistent_completions(parse_masked("BB", 2), p);
  REQUIRE(one.size() == 1);
  CHECK(one[0].weight == 1.0);

  const auto all = consistent_completions(parse_masked("??", 2), p);
  double total = 0.0;
  for (const auto& e : all) {
    CHECK(e.weight == doctest::Approx(p.probability(e.index)));
    total += e.weight;
  }
  CHECK(total == doctest::Approx(1.0));
  CHECK_THROWS_AS(consistent_completions(parse_masked("BA", 2), p), UnsupportedContext);
}

TEST_CASE("tabular distributions validate and round-trip") {
  CHECK_THROWS(TabularDistribution(1, 2, {0.5, 0.6}));
  CHECK_THROWS(TabularDistribution(1, 2, {1.5, -0.5}));
  RandomSource rng(5);
  std::vector<double> w(27);
  for (double& v : w) v = rng.uniform();
  const auto p = TabularDistribution::from_unnormalized(3, 3, w);
  const auto q = TabularDistribution::from_json(nlohmann::json::parse(p.to_json().dump()));
  CHECK(tv_distance(p, q) == 0.0);
  CHECK_THROWS(TabularDistribution::from_json(nlohmann::json{{"D", 1}, {"S", 2}, {"weights", {0.5, 0.5}}, {"x", 1}}));
}

TEST_CASE("random streams are reproducible and distinct") {
  RandomSource a(42, 7);
  RandomSource b(42, 7);
  RandomSource c(42, 8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
    differs = differs || va != c.next_u64();
  }
  CHECK(differs);
  std::vector<double> u;
  RandomSource d(9);
  for (int i = 0; i < 20000; ++i) u.push_back(d.uniform());
  CHECK(ks_uniform(u).pass);
}
