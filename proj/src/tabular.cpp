#include "guidesampler/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "guidesampler/errors.hpp"

namespace guidesampler {

std::uint64_t state_count(int length, int alphabet_size) {
  if (length <= 0) throw DomainError("sequence length must be positive");
  Alphabet alphabet(alphabet_size);
  std::uint64_t n = 1;
  const auto s = static_cast<std::uint64_t>(alphabet.size());
  for (int i = 0; i < length; ++i) {
    if (n > std::numeric_limits<std::uint64_t>::max() / s) {
      throw SizeError("S^D overflows the 64-bit index range");
    }
    n *= s;
  }
  return n;
}

std::uint64_t encode_index(const TokenSequence& x) {
  std::uint64_t index = 0;
  std::uint64_t place = 1;
  const auto s = static_cast<std::uint64_t>(x.alphabet_size());
  state_count(x.length(), x.alphabet_size());
  for (int i = 0; i < x.length(); ++i) {
    index += static_cast<std::uint64_t>(x[i]) * place;
    place *= s;
  }
  return index;
}

TokenSequence decode_index(std::uint64_t index, int length, int alphabet_size) {
  const std::uint64_t n = state_count(length, alphabet_size);
  if (index >= n) throw DomainError("index out of range for S^D");
  std::vector<Token> tokens(static_cast<std::size_t>(length));
  const auto s = static_cast<std::uint64_t>(alphabet_size);
  for (auto& t : tokens) {
    t = static_cast<Token>(index % s);
    index /= s;
  }
  return TokenSequence(std::move(tokens), alphabet_size);
}

std::uint64_t encode_masked_index(const MaskedSequence& x) {
  state_count(x.length(), x.alphabet_size() + 1);
  std::uint64_t index = 0;
  std::uint64_t place = 1;
  const auto radix = static_cast<std::uint64_t>(x.alphabet_size() + 1);
  for (int i = 0; i < x.length(); ++i) {
    index += static_cast<std::uint64_t>(x[i]) * place;
    place *= radix;
  }
  return index;
}

TabularDistribution::TabularDistribution(int length, int alphabet_size,
                                         std::vector<double> weights)
    : length_(length), alphabet_size_(alphabet_size), weights_(std::move(weights)) {
  const std::uint64_t n = state_count(length, alphabet_size);
  if (n > kMaxTabularStates) throw SizeError("S^D exceeds the tabular state cap");
  if (weights_.size() != n) {
    throw DomainError("expected " + std::to_string(n) + " weights, got " +
                      std::to_string(weights_.size()));
  }
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("weights must be finite and >= 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    std::ostringstream os;
    os.precision(17);
    os << "weights sum to " << total << ", expected 1";
    throw DomainError(os.str());
  }
  cumulative_.resize(weights_.size());
  std::partial_sum(weights_.begin(), weights_.end(), cumulative_.begin());
}

TabularDistribution TabularDistribution::from_unnormalized(int length, int alphabet_size,
                                                           std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw DomainError("weights must have positive sum");
  for (double& w : weights) w /= total;
  return TabularDistribution(length, alphabet_size, std::move(weights));
}

TabularDistribution TabularDistribution::uniform(int length, int alphabet_size) {
  const std::uint64_t n = state_count(length, alphabet_size);
  if (n > kMaxTabularStates) throw SizeError("S^D exceeds the tabular state cap");
  return from_unnormalized(length, alphabet_size, std::vector<double>(n, 1.0));
}

TabularDistribution TabularDistribution::point_mass(const TokenSequence& x) {
  const std::uint64_t n = state_count(x.length(), x.alphabet_size());
  if (n > kMaxTabularStates) throw SizeError("S^D exceeds the tabular state cap");
  std::vector<double> w(n, 0.0);
  w[encode_index(x)] = 1.0;
  return TabularDistribution(x.length(), x.alphabet_size(), std::move(w));
}

TabularDistribution TabularDistribution::uniform_over(const std::vector<TokenSequence>& support) {
  if (support.empty()) throw DomainError("support must be nonempty");
  const int length = support.front().length();
  const int s = support.front().alphabet_size();
  const std::uint64_t n = state_count(length, s);
  if (n > kMaxTabularStates) throw SizeError("S^D exceeds the tabular state cap");
  std::vector<double> w(n, 0.0);
  for (const auto& x : support) {
    if (x.length() != length || x.alphabet_size() != s) {
      throw DomainError("support sequences must share D and S");
    }
    w[encode_index(x)] = 1.0;
  }
  return from_unnormalized(length, s, std::move(w));
}

TokenSequence TabularDistribution::sample(RandomSource& rng) const {
  const double u = rng.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  auto index = static_cast<std::uint64_t>(it - cumulative_.begin());
  if (index >= weights_.size()) index = weights_.size() - 1;
  // Skip zero-mass cells that share a cumulative value with their predecessor.
  while (weights_[index] == 0.0 && index > 0) --index;
  return decode_index(index, length_, alphabet_size_);
}

std::vector<double> TabularDistribution::marginal(int pos) const {
  if (pos < 0 || pos >= length_) throw DomainError("position out of range");
  std::vector<double> out(static_cast<std::size_t>(alphabet_size_), 0.0);
  std::uint64_t place = 1;
  for (int i = 0; i < pos; ++i) place *= static_cast<std::uint64_t>(alphabet_size_);
  for (std::uint64_t idx = 0; idx < weights_.size(); ++idx) {
    out[(idx / place) % static_cast<std::uint64_t>(alphabet_size_)] += weights_[idx];
  }
  return out;
}

nlohmann::json TabularDistribution::to_json() const {
  return nlohmann::json{{"D", length_}, {"S", alphabet_size_}, {"weights", weights_}};
}

TabularDistribution TabularDistribution::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DomainError("tabular distribution JSON must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key != "D" && key != "S" && key != "weights") {
      throw DomainError("unknown key in tabular distribution JSON: " + key);
    }
  }
  return TabularDistribution(j.at("D").get<int>(), j.at("S").get<int>(),
                             j.at("weights").get<std::vector<double>>());
}

std::vector<Completion> consistent_completions(const MaskedSequence& xt,
                                               const TabularDistribution& p) {
  if (xt.length() != p.length() || xt.alphabet_size() != p.alphabet_size()) {
    throw DomainError("masked sequence and distribution disagree on D or S");
  }
  std::vector<Completion> out;
  double total = 0.0;
  const auto weights = p.weights();
  for_each_completion(xt, [&](std::uint64_t index, std::span<const Token>) {
    const double w = weights[index];
    if (w > 0.0) {
      out.push_back({index, w});
      total += w;
    }
  });
  if (out.empty()) {
    auto positions = xt.unmasked_positions();
    std::ostringstream os;
    os << "unsupported context " << to_string(xt)
       << ": no positive-mass sequence matches the observed positions {";
    for (std::size_t k = 0; k < positions.size(); ++k) os << (k ? "," : "") << positions[k];
    os << "}";
    throw UnsupportedContext(os.str(), std::move(positions));
  }
  for (auto& c : out) c.weight /= total;
  return out;
}

MaskedSequence mask_forward(const TokenSequence& x1, double t,
                            const InterpolationSchedule& schedule, RandomSource& rng) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("mask_forward: t must lie in [0, 1]");
  const double keep = schedule.kappa(t);
  MaskedSequence out(x1);
  for (int i = 0; i < x1.length(); ++i) {
    // keep = 0 and keep = 1 are exact: uniform() is in [0, 1).
    if (!(rng.uniform() < keep)) out.set(i, out.mask());
  }
  return out;
}

}  // namespace guidesampler
