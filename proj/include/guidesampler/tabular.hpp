#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "guidesampler/random.hpp"
#include "guidesampler/schedule.hpp"
#include "guidesampler/sequence.hpp"

namespace guidesampler {

/// Largest S^D a TabularDistribution will allocate.
inline constexpr std::uint64_t kMaxTabularStates = std::uint64_t{1} << 24;

/// S^D, throwing SizeError if it overflows 64 bits.
std::uint64_t state_count(int length, int alphabet_size);

/// Little-endian mixed radix: position 0 is the least significant digit.
std::uint64_t encode_index(const TokenSequence& x);
TokenSequence decode_index(std::uint64_t index, int length, int alphabet_size);

/// Index of a masked sequence in the (S+1)^D space of mask-extended sequences.
std::uint64_t encode_masked_index(const MaskedSequence& x);

/// Explicit probability table over all S^D sequences, in encode_index order.
class TabularDistribution {
 public:
  /// Weights must be nonnegative and sum to 1 within 1e-9.
  TabularDistribution(int length, int alphabet_size, std::vector<double> weights);

  /// Normalizes arbitrary nonnegative weights with positive sum.
  static TabularDistribution from_unnormalized(int length, int alphabet_size,
                                               std::vector<double> weights);
  static TabularDistribution uniform(int length, int alphabet_size);
  static TabularDistribution point_mass(const TokenSequence& x);
  /// Uniform over the given support.
  static TabularDistribution uniform_over(const std::vector<TokenSequence>& support);

  int length() const noexcept { return length_; }
  int alphabet_size() const noexcept { return alphabet_size_; }
  std::uint64_t size() const noexcept { return weights_.size(); }
  std::span<const double> weights() const noexcept { return weights_; }
  double probability(std::uint64_t index) const { return weights_.at(index); }
  double probability(const TokenSequence& x) const { return weights_.at(encode_index(x)); }

  TokenSequence sample(RandomSource& rng) const;
  /// Marginal of position `pos` (length S).
  std::vector<double> marginal(int pos) const;

  nlohmann::json to_json() const;
  static TabularDistribution from_json(const nlohmann::json& j);

 private:
  int length_;
  int alphabet_size_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

struct Completion {
  std::uint64_t index;
  double weight;
};

/// Visits every clean sequence agreeing with `xt` on its unmasked positions.
/// `fn(index, tokens)` receives the encode_index of the completion and its tokens.
template <class Fn>
void for_each_completion(const MaskedSequence& xt, Fn&& fn) {
  const int length = xt.length();
  const int radix = xt.alphabet_size();
  std::vector<Token> tokens(xt.tokens().begin(), xt.tokens().end());
  std::vector<std::uint64_t> place(static_cast<std::size_t>(length));
  std::uint64_t p = 1;
  std::uint64_t index = 0;
  std::vector<int> free;
  for (int i = 0; i < length; ++i) {
    place[static_cast<std::size_t>(i)] = p;
    if (xt.is_masked(i)) {
      free.push_back(i);
      tokens[static_cast<std::size_t>(i)] = 0;
    } else {
      index += static_cast<std::uint64_t>(xt[i]) * p;
    }
    p *= static_cast<std::uint64_t>(radix);
  }
  for (;;) {
    fn(index, std::span<const Token>(tokens));
    // Odometer increment over the free positions.
    std::size_t k = 0;
    for (; k < free.size(); ++k) {
      auto pos = static_cast<std::size_t>(free[k]);
      if (tokens[pos] + 1 < radix) {
        ++tokens[pos];
        index += place[pos];
        break;
      }
      index -= static_cast<std::uint64_t>(radix - 1) * place[pos];
      tokens[pos] = 0;
    }
    if (k == free.size()) return;
  }
}

/// Clean sequences consistent with `xt`, with weights p(x1 | xt).
/// Throws UnsupportedContext when every consistent sequence has zero mass.
std::vector<Completion> consistent_completions(const MaskedSequence& xt,
                                               const TabularDistribution& p);

/// Forward masking: each position keeps its token with probability kappa(t).
MaskedSequence mask_forward(const TokenSequence& x1, double t,
                            const InterpolationSchedule& schedule, RandomSource& rng);

}  // namespace guidesampler
