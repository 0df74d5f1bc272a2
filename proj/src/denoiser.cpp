#include "guidesampler/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "guidesampler/errors.hpp"

namespace guidesampler {

namespace {

constexpr std::uint64_t kMaxExactTable = std::uint64_t{1} << 21;

MaskedSequence decode_masked(std::uint64_t index, int length, int alphabet_size) {
  std::vector<Token> tokens(static_cast<std::size_t>(length));
  const auto radix = static_cast<std::uint64_t>(alphabet_size + 1);
  for (auto& t : tokens) {
    t = static_cast<Token>(index % radix);
    index /= radix;
  }
  return MaskedSequence(std::move(tokens), alphabet_size);
}

void one_hot(std::span<double> out, Token s) {
  std::fill(out.begin(), out.end(), 0.0);
  out[static_cast<std::size_t>(s)] = 1.0;
}

}  // namespace

void softmax(std::span<double> v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : v) hi = std::max(hi, x);
  if (!std::isfinite(hi)) {
    if (hi == -std::numeric_limits<double>::infinity()) {
      throw DomainError("softmax: every logit is -inf");
    }
    throw DomainError("softmax: non-finite logit");
  }
  double total = 0.0;
  for (double& x : v) {
    x = std::exp(x - hi);
    total += x;
  }
  for (double& x : v) x /= total;
}

PerPositionPosterior::PerPositionPosterior(int length, int alphabet_size)
    : length_(length),
      alphabet_size_(alphabet_size),
      probs_(static_cast<std::size_t>(length) * static_cast<std::size_t>(alphabet_size), 0.0) {}

std::span<double> PerPositionPosterior::row(int pos) {
  return std::span<double>(probs_).subspan(static_cast<std::size_t>(pos) * alphabet_size_,
                                           static_cast<std::size_t>(alphabet_size_));
}

std::span<const double> PerPositionPosterior::row(int pos) const {
  return std::span<const double>(probs_).subspan(static_cast<std::size_t>(pos) * alphabet_size_,
                                                 static_cast<std::size_t>(alphabet_size_));
}

void Denoiser::check_input(const MaskedSequence& xt) const {
  if (xt.length() != length() || xt.alphabet_size() != alphabet_size()) {
    throw DomainError("denoiser input disagrees with the model on D or S");
  }
}

PerPositionPosterior Denoiser::posterior(const MaskedSequence& xt) const {
  check_input(xt);
  PerPositionPosterior out(length(), alphabet_size());
  for (int i = 0; i < length(); ++i) {
    if (xt.is_masked(i)) {
      position_posterior(xt, i, out.row(i));
    } else {
      one_hot(out.row(i), xt[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

PerPositionPosterior exact_denoise(const TabularDistribution& p, const MaskedSequence& xt) {
  const auto completions = consistent_completions(xt, p);
  const int length = p.length();
  const int s = p.alphabet_size();
  PerPositionPosterior out(length, s);
  for (const auto& c : completions) {
    std::uint64_t index = c.index;
    for (int i = 0; i < length; ++i) {
      out.row(i)[index % static_cast<std::uint64_t>(s)] += c.weight;
      index /= static_cast<std::uint64_t>(s);
    }
  }
  // Unmasked rows are exactly one-hot already; renormalize masked rows against rounding.
  for (int i = 0; i < length; ++i) {
    auto row = out.row(i);
    if (!xt.is_masked(i)) {
      one_hot(row, xt[i]);
      continue;
    }
    double total = 0.0;
    for (double v : row) total += v;
    for (double& v : row) v /= total;
  }
  return out;
}

ExactDenoiser::ExactDenoiser(std::shared_ptr<const TabularDistribution> p) : p_(std::move(p)) {
  if (!p_) throw DomainError("ExactDenoiser needs a distribution");
  const int length = p_->length();
  const int s = p_->alphabet_size();
  std::uint64_t contexts = 0;
  try {
    contexts = state_count(length, s + 1);
  } catch (const SizeError&) {
    return;
  }
  const auto row_block = static_cast<std::uint64_t>(length) * static_cast<std::uint64_t>(s);
  if (contexts > kMaxExactTable / row_block) return;
  table_.assign(contexts * row_block, std::numeric_limits<double>::quiet_NaN());
  for (std::uint64_t idx = 0; idx < contexts; ++idx) {
    const MaskedSequence xt = decode_masked(idx, length, s);
    try {
      const PerPositionPosterior post = compute(xt);
      for (int i = 0; i < length; ++i) {
        std::copy(post.row(i).begin(), post.row(i).end(),
                  table_.begin() + static_cast<std::ptrdiff_t>(idx * row_block + i * s));
      }
    } catch (const UnsupportedContext&) {
      // Left as NaN; lookups rethrow with the proper message.
    }
  }
}

PerPositionPosterior ExactDenoiser::compute(const MaskedSequence& xt) const {
  return exact_denoise(*p_, xt);
}

void ExactDenoiser::position_posterior(const MaskedSequence& xt, int pos,
                                       std::span<double> out) const {
  check_input(xt);
  const int s = alphabet_size();
  if (!xt.is_masked(pos)) {
    one_hot(out, xt[pos]);
    return;
  }
  if (!table_.empty()) {
    const std::uint64_t idx = encode_masked_index(xt);
    const auto offset = idx * static_cast<std::uint64_t>(length()) * s +
                        static_cast<std::uint64_t>(pos) * s;
    if (std::isnan(table_[offset])) compute(xt);  // throws UnsupportedContext
    std::copy_n(table_.begin() + static_cast<std::ptrdiff_t>(offset), s, out.begin());
    return;
  }
  // Single-position marginal by direct enumeration.
  std::fill(out.begin(), out.end(), 0.0);
  double total = 0.0;
  const auto weights = p_->weights();
  for_each_completion(xt, [&](std::uint64_t index, std::span<const Token> tokens) {
    const double w = weights[index];
    out[static_cast<std::size_t>(tokens[static_cast<std::size_t>(pos)])] += w;
    total += w;
  });
  if (!(total > 0.0)) compute(xt);  // throws UnsupportedContext
  for (double& v : out) v /= total;
}

PerPositionPosterior ExactDenoiser::posterior(const MaskedSequence& xt) const {
  check_input(xt);
  if (table_.empty()) return compute(xt);
  PerPositionPosterior out(length(), alphabet_size());
  for (int i = 0; i < length(); ++i) position_posterior(xt, i, out.row(i));
  return out;
}

// ---------------------------------------------------------------------------

void LogitModifier::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw DomainError("temperature must be positive and finite");
  }
  if (!(wildtype_weight >= 0.0)) throw DomainError("wild-type weight must be >= 0");
  if (wildtype_weight > 0.0 && !wildtype) {
    throw DomainError("wild-type weight > 0 requires a wild-type sequence");
  }
}

void LogitModifier::apply(int pos, std::span<double> logits) const {
  if (is_identity()) return;
  if (wildtype_weight != 0.0) {
    logits[static_cast<std::size_t>((*wildtype)[pos])] += wildtype_weight;
  }
  if (temperature != 1.0) {
    for (double& l : logits) l /= temperature;
  }
}

std::vector<double> apply_modifiers(std::span<const double> logits, int length, int alphabet_size,
                                    const LogitModifier& mod) {
  mod.validate();
  if (logits.size() != static_cast<std::size_t>(length) * alphabet_size) {
    throw DomainError("logit table must be D x S");
  }
  if (mod.wildtype && (mod.wildtype->length() != length ||
                       mod.wildtype->alphabet_size() != alphabet_size)) {
    throw DomainError("wild-type sequence disagrees with the logit table shape");
  }
  std::vector<double> out(logits.begin(), logits.end());
  for (int d = 0; d < length; ++d) {
    mod.apply(d, std::span<double>(out).subspan(static_cast<std::size_t>(d) * alphabet_size,
                                                static_cast<std::size_t>(alphabet_size)));
  }
  return out;
}

ModifiedDenoiser::ModifiedDenoiser(std::shared_ptr<const Denoiser> base, LogitModifier mod)
    : base_(std::move(base)), mod_(std::move(mod)) {
  if (!base_) throw DomainError("ModifiedDenoiser needs a base denoiser");
  mod_.validate();
  if (mod_.wildtype && (mod_.wildtype->length() != base_->length() ||
                        mod_.wildtype->alphabet_size() != base_->alphabet_size())) {
    throw DomainError("wild-type sequence disagrees with the denoiser shape");
  }
}

void ModifiedDenoiser::position_posterior(const MaskedSequence& xt, int pos,
                                          std::span<double> out) const {
  base_->position_posterior(xt, pos, out);
  if (mod_.is_identity() || !xt.is_masked(pos)) return;
  for (double& v : out) v = std::log(v);
  mod_.apply(pos, out);
  softmax(out);
}

// ---------------------------------------------------------------------------

ParametricDenoiser::ParametricDenoiser(int length, int alphabet_size)
    : length_(length), alphabet_size_(alphabet_size) {
  Alphabet check(alphabet_size);
  if (length <= 0) throw DomainError("sequence length must be positive");
  const auto d = static_cast<std::size_t>(length);
  const auto s = static_cast<std::size_t>(alphabet_size);
  single_site_.assign(d * s, 0.0);
  pairwise_.assign(d * s * d * (s + 1), 0.0);
}

std::size_t ParametricDenoiser::single_index(int pos, Token s) const {
  return static_cast<std::size_t>(pos) * alphabet_size_ + static_cast<std::size_t>(s);
}

std::size_t ParametricDenoiser::pair_index(int pos, Token s, int other, Token c) const {
  const auto d = static_cast<std::size_t>(length_);
  const auto radix = static_cast<std::size_t>(alphabet_size_ + 1);
  return ((static_cast<std::size_t>(pos) * alphabet_size_ + static_cast<std::size_t>(s)) * d +
          static_cast<std::size_t>(other)) *
             radix +
         static_cast<std::size_t>(c);
}

void ParametricDenoiser::logits(const MaskedSequence& xt, int pos, std::span<double> out) const {
  check_input(xt);
  for (Token s = 0; s < alphabet_size_; ++s) {
    double l = single_site_[single_index(pos, s)];
    for (int j = 0; j < length_; ++j) {
      if (j == pos) continue;
      l += pairwise_[pair_index(pos, s, j, xt[j])];
    }
    out[static_cast<std::size_t>(s)] = l;
  }
}

void ParametricDenoiser::position_posterior(const MaskedSequence& xt, int pos,
                                            std::span<double> out) const {
  if (!xt.is_masked(pos)) {
    check_input(xt);
    one_hot(out, xt[pos]);
    return;
  }
  logits(xt, pos, out);
  softmax(out);
}

nlohmann::json ParametricDenoiser::to_json() const {
  return nlohmann::json{{"D", length_},
                        {"S", alphabet_size_},
                        {"single_site", single_site_},
                        {"pairwise", pairwise_}};
}

ParametricDenoiser ParametricDenoiser::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DomainError("parametric denoiser JSON must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key != "D" && key != "S" && key != "single_site" && key != "pairwise") {
      throw DomainError("unknown key in parametric denoiser JSON: " + key);
    }
  }
  ParametricDenoiser out(j.at("D").get<int>(), j.at("S").get<int>());
  auto single = j.at("single_site").get<std::vector<double>>();
  auto pair = j.at("pairwise").get<std::vector<double>>();
  if (single.size() != out.single_site_.size() || pair.size() != out.pairwise_.size()) {
    throw DomainError("parametric denoiser JSON has wrongly sized parameter arrays");
  }
  for (double v : single) {
    if (!std::isfinite(v)) throw DomainError("non-finite denoiser parameter");
  }
  for (double v : pair) {
    if (!std::isfinite(v)) throw DomainError("non-finite denoiser parameter");
  }
  out.single_site_ = std::move(single);
  out.pairwise_ = std::move(pair);
  return out;
}

ParametricDenoiser ParametricDenoiser::random(int length, int alphabet_size, double scale,
                                              RandomSource& rng) {
  ParametricDenoiser out(length, alphabet_size);
  for (double& v : out.single_site_) v = scale * rng.normal();
  for (int i = 0; i < length; ++i) {
    for (Token s = 0; s < alphabet_size; ++s) {
      for (int j = 0; j < length; ++j) {
        if (j == i) continue;
        for (Token c = 0; c <= alphabet_size; ++c) {
          out.pairwise_[out.pair_index(i, s, j, c)] = scale * rng.normal();
        }
      }
    }
  }
  return out;
}

}  // namespace guidesampler
