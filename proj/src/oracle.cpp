#include "guidesampler/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include "guidesampler/errors.hpp"

namespace guidesampler {

TabularDistribution brute_force_posterior(const TabularDistribution& p, const CleanPredictor& clean,
                                          double gamma) {
  if (clean.length() != p.length() || clean.alphabet_size() != p.alphabet_size()) {
    throw SizeError("brute_force_posterior: predictor and distribution disagree on D or S");
  }
  if (!(gamma >= 0.0)) throw DomainError("brute_force_posterior: gamma must be >= 0");
  const auto w = p.weights();
  std::vector<double> tilted(w.size());
  double z = 0.0;
  for (std::uint64_t i = 0; i < w.size(); ++i) {
    if (w[i] == 0.0) continue;
    const double like = clean(decode_index(i, p.length(), p.alphabet_size()));
    tilted[i] = w[i] * (gamma == 0.0 ? 1.0 : std::pow(like, gamma));
    z += tilted[i];
  }
  if (!(z > 0.0)) throw DomainError("brute_force_posterior: zero normalizer");
  return TabularDistribution::from_unnormalized(p.length(), p.alphabet_size(), std::move(tilted));
}

EmpiricalDistribution::EmpiricalDistribution(int length, int alphabet_size)
    : length_(length),
      alphabet_size_(alphabet_size),
      counts_(static_cast<std::size_t>(state_count(length, alphabet_size)), 0) {}

void EmpiricalDistribution::add(const TokenSequence& x) {
  if (x.length() != length_ || x.alphabet_size() != alphabet_size_) {
    throw SizeError("EmpiricalDistribution: sample has the wrong shape");
  }
  add_index(encode_index(x));
}

void EmpiricalDistribution::add_index(std::uint64_t index) {
  ++counts_.at(index);
  ++total_;
}

std::vector<double> EmpiricalDistribution::probabilities() const {
  std::vector<double> out(counts_.size(), 0.0);
  if (total_ == 0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<double>(counts_[i]) / static_cast<double>(total_);
  }
  return out;
}

double tv_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw SizeError("tv_distance: index sets differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return 0.5 * acc;
}

double tv_distance(const TabularDistribution& a, const TabularDistribution& b) {
  return tv_distance(a.weights(), b.weights());
}

double tv_distance(const EmpiricalDistribution& a, const TabularDistribution& b) {
  const auto pa = a.probabilities();
  return tv_distance(pa, b.weights());
}

double tv_distance(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
  const auto pa = a.probabilities();
  const auto pb = b.probabilities();
  return tv_distance(pa, pb);
}

nlohmann::json TestVerdict::to_json() const {
  return nlohmann::json{{"statistic", statistic}, {"dof", dof},   {"p_value", p_value},
                        {"alpha", alpha},         {"pass", pass}};
}

double chi_square_survival(double statistic, double dof) {
  if (!(dof > 0.0)) return 1.0;
  if (!std::isfinite(statistic)) return 0.0;
  if (statistic <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

TestVerdict chi_square_gof(std::span<const std::uint64_t> counts,
                           std::span<const double> expected_probs, double alpha) {
  if (counts.size() != expected_probs.size()) throw SizeError("chi_square_gof: cell counts differ");
  const double n = std::accumulate(counts.begin(), counts.end(), 0.0,
                                   [](double acc, std::uint64_t c) { return acc + static_cast<double>(c); });
  if (n == 0.0) throw DomainError("chi_square_gof: empty sample");

  double statistic = 0.0;
  int cells = 0;
  double pooled_expected = 0.0;
  double pooled_observed = 0.0;
  bool impossible = false;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = n * expected_probs[i];
    const auto o = static_cast<double>(counts[i]);
    if (e == 0.0) {
      if (o > 0.0) impossible = true;
      continue;
    }
    if (e < 5.0) {
      pooled_expected += e;
      pooled_observed += o;
      continue;
    }
    statistic += (o - e) * (o - e) / e;
    ++cells;
  }
  if (pooled_expected > 0.0) {
    statistic += (pooled_observed - pooled_expected) * (pooled_observed - pooled_expected) /
                 pooled_expected;
    ++cells;
  }
  TestVerdict v;
  v.alpha = alpha;
  v.dof = std::max(cells - 1, 0);
  if (impossible) {
    v.statistic = std::numeric_limits<double>::infinity();
    v.p_value = 0.0;
  } else if (v.dof == 0) {
    v.statistic = 0.0;
    v.p_value = 1.0;
  } else {
    v.statistic = statistic;
    v.p_value = chi_square_survival(statistic, v.dof);
  }
  v.pass = v.p_value > alpha;
  return v;
}

TestVerdict chi_square_gof(const EmpiricalDistribution& emp, const TabularDistribution& expected,
                           double alpha) {
  return chi_square_gof(emp.counts(), expected.weights(), alpha);
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-17) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

namespace {

TestVerdict ks_verdict(double d, double effective_n, double alpha) {
  const double root = std::sqrt(effective_n);
  TestVerdict v;
  v.statistic = d;
  v.alpha = alpha;
  // Stephens' finite-sample correction.
  v.p_value = kolmogorov_survival((root + 0.12 + 0.11 / root) * d);
  v.pass = v.p_value > alpha;
  return v;
}

}  // namespace

TestVerdict ks_test(std::span<const double> values, const std::function<double(double)>& cdf,
                    double alpha) {
  if (values.empty()) throw DomainError("ks_test: no values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return ks_verdict(d, n, alpha);
}

TestVerdict ks_uniform(std::span<const double> values, double alpha) {
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("ks_uniform: value outside [0, 1]");
  }
  return ks_test(values, [](double x) { return x; }, alpha);
}

TestVerdict ks_two_sample(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.empty() || b.empty()) throw DomainError("ks_two_sample: empty sample");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const auto na = static_cast<double>(sa.size());
  const auto nb = static_cast<double>(sb.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return ks_verdict(d, na * nb / (na + nb), alpha);
}

double mean(std::span<const double> v) {
  if (v.empty()) throw DomainError("mean: empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size() - 1);
}

TestVerdict mean_greater_test(std::span<const double> a, std::span<const double> b, double alpha) {
  const double diff = mean(a) - mean(b);
  const double se = std::sqrt(variance(a) / static_cast<double>(a.size()) +
                              variance(b) / static_cast<double>(b.size()));
  TestVerdict v;
  v.alpha = alpha;
  v.dof = static_cast<double>(a.size() + b.size() - 2);
  if (se == 0.0) {
    v.statistic = diff > 0.0 ? std::numeric_limits<double>::infinity()
                             : (diff < 0.0 ? -std::numeric_limits<double>::infinity() : 0.0);
    v.p_value = diff > 0.0 ? 0.0 : 1.0;
  } else {
    v.statistic = diff / se;
    v.p_value = 0.5 * std::erfc(v.statistic / std::sqrt(2.0));
  }
  v.pass = v.p_value < alpha;
  return v;
}

double auroc(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw SizeError("auroc: scores and labels differ in length");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos = 0.0;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]]) {
        pos += 1.0;
        rank_sum += avg_rank;
      }
    }
    i = j;
  }
  const double neg = static_cast<double>(scores.size()) - pos;
  if (pos == 0.0 || neg == 0.0) throw DomainError("auroc: needs both classes");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

}  // namespace guidesampler
