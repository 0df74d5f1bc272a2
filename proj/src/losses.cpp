#include "guidesampler/losses.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <vector>

#include "guidesampler/errors.hpp"

namespace guidesampler {

namespace {

void check_pair(const Denoiser& denoiser, const TabularDistribution& p, int cap, const char* what) {
  if (denoiser.length() != p.length() || denoiser.alphabet_size() != p.alphabet_size()) {
    throw DomainError(std::string(what) + ": denoiser and distribution disagree on D or S");
  }
  if (p.length() > cap) {
    throw SizeError(std::string(what) + ": D = " + std::to_string(p.length()) +
                    " exceeds the enumeration cap " + std::to_string(cap));
  }
}

double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

// Sum over data sequences and mask patterns of pattern_weight[m] times the
// masked-position cross-entropies.
double masked_pattern_loss(const Denoiser& denoiser, const TabularDistribution& p,
                           const std::vector<double>& pattern_weight) {
  const int length = p.length();
  const int s = p.alphabet_size();
  const auto weights = p.weights();
  std::vector<double> row(static_cast<std::size_t>(s));
  double loss = 0.0;
  for (std::uint64_t idx = 0; idx < weights.size(); ++idx) {
    const double px = weights[idx];
    if (px == 0.0) continue;
    const TokenSequence x = decode_index(idx, length, s);
    for (std::uint32_t pattern = 1; pattern < (1u << length); ++pattern) {
      const int m = std::popcount(pattern);
      MaskedSequence xt(x);
      for (int i = 0; i < length; ++i) {
        if (pattern & (1u << i)) xt.set(i, xt.mask());
      }
      double ce = 0.0;
      for (int i = 0; i < length; ++i) {
        if (!(pattern & (1u << i))) continue;
        denoiser.position_posterior(xt, i, row);
        ce -= std::log(row[static_cast<std::size_t>(x[i])]);
      }
      loss += px * pattern_weight[static_cast<std::size_t>(m)] * ce;
    }
  }
  return loss;
}

}  // namespace

double fm_loss_exact(const Denoiser& denoiser, const TabularDistribution& p) {
  check_pair(denoiser, p, kMaxFmLossLength, "fm_loss_exact");
  const int length = p.length();
  std::vector<double> weight(static_cast<std::size_t>(length) + 1);
  for (int m = 0; m <= length; ++m) {
    weight[static_cast<std::size_t>(m)] =
        factorial(m) * factorial(length - m) / factorial(length + 1);
  }
  return masked_pattern_loss(denoiser, p, weight);
}

double fm_elbo_loss_exact(const Denoiser& denoiser, const TabularDistribution& p) {
  check_pair(denoiser, p, kMaxFmLossLength, "fm_elbo_loss_exact");
  const int length = p.length();
  std::vector<double> weight(static_cast<std::size_t>(length) + 1, 0.0);
  for (int m = 1; m <= length; ++m) {
    weight[static_cast<std::size_t>(m)] =
        factorial(m - 1) * factorial(length - m) / factorial(length);
  }
  return masked_pattern_loss(denoiser, p, weight);
}

double aoarm_loss_exact(const Denoiser& denoiser, const TabularDistribution& p) {
  check_pair(denoiser, p, kMaxAoarmLossLength, "aoarm_loss_exact");
  const int length = p.length();
  const int s = p.alphabet_size();
  const auto weights = p.weights();
  std::vector<double> row(static_cast<std::size_t>(s));
  std::vector<int> order(static_cast<std::size_t>(length));
  const double perm_weight = 1.0 / factorial(length);
  double loss = 0.0;
  for (std::uint64_t idx = 0; idx < weights.size(); ++idx) {
    const double px = weights[idx];
    if (px == 0.0) continue;
    const TokenSequence x = decode_index(idx, length, s);
    std::iota(order.begin(), order.end(), 0);
    double nll = 0.0;
    do {
      MaskedSequence xt = MaskedSequence::fully_masked(length, s);
      for (int pos : order) {
        denoiser.position_posterior(xt, pos, row);
        nll -= std::log(row[static_cast<std::size_t>(x[pos])]);
        xt.set(pos, x[pos]);
      }
    } while (std::next_permutation(order.begin(), order.end()));
    loss += px * perm_weight * nll;
  }
  return loss;
}

}  // namespace guidesampler
