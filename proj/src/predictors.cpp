#include "guidesampler/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "guidesampler/errors.hpp"

namespace guidesampler {

namespace {

constexpr std::uint64_t kMaxMarginalTable = std::uint64_t{1} << 21;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(sigmoid(z)) without overflow.
double log_sigmoid(double z) {
  if (z >= 0.0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

MaskedSequence decode_masked(std::uint64_t index, int length, int alphabet_size) {
  std::vector<Token> tokens(static_cast<std::size_t>(length));
  const auto radix = static_cast<std::uint64_t>(alphabet_size + 1);
  for (auto& t : tokens) {
    t = static_cast<Token>(index % radix);
    index /= radix;
  }
  return MaskedSequence(std::move(tokens), alphabet_size);
}

}  // namespace

double clamp_likelihood(double p) {
  if (std::isnan(p)) throw DomainError("predictor returned NaN");
  return std::clamp(p, kLikelihoodFloor, 1.0);
}

// ---------------------------------------------------------------------------

CleanPredictor::CleanPredictor(int length, int alphabet_size,
                               std::function<double(const TokenSequence&)> fn)
    : length_(length), alphabet_size_(alphabet_size), fn_(std::move(fn)) {
  Alphabet check(alphabet_size);
  if (length <= 0) throw DomainError("sequence length must be positive");
  if (!fn_) throw DomainError("clean predictor needs a function");
}

CleanPredictor CleanPredictor::constant(int length, int alphabet_size, double value) {
  if (!(value >= 0.0 && value <= 1.0)) throw DomainError("constant must lie in [0, 1]");
  return CleanPredictor(length, alphabet_size, [value](const TokenSequence&) { return value; });
}

CleanPredictor CleanPredictor::tabulated(int length, int alphabet_size, std::vector<double> values) {
  if (values.size() != state_count(length, alphabet_size)) {
    throw DomainError("tabulated predictor needs S^D values");
  }
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("predictor values must lie in [0, 1]");
  }
  auto table = std::make_shared<const std::vector<double>>(std::move(values));
  return CleanPredictor(length, alphabet_size, [table](const TokenSequence& x) {
    return (*table)[encode_index(x)];
  });
}

double CleanPredictor::operator()(const TokenSequence& x) const {
  if (x.length() != length_ || x.alphabet_size() != alphabet_size_) {
    throw DomainError("clean predictor input disagrees on D or S");
  }
  const double v = fn_(x);
  if (!(v >= 0.0 && v <= 1.0)) {
    throw DomainError("clean predictor output outside [0, 1] for " + to_string(x));
  }
  return v;
}

std::vector<double> CleanPredictor::tabulate() const {
  const std::uint64_t n = state_count(length_, alphabet_size_);
  if (n > kMaxTabularStates) throw SizeError("S^D exceeds the tabular state cap");
  std::vector<double> out(n);
  for (std::uint64_t i = 0; i < n; ++i) out[i] = (*this)(decode_index(i, length_, alphabet_size_));
  return out;
}

// ---------------------------------------------------------------------------

GradientSurface::GradientSurface(int length, int alphabet_size)
    : length_(length),
      alphabet_size_(alphabet_size),
      values_(static_cast<std::size_t>(length) * (alphabet_size + 1), 0.0) {}

GradientSurface& GradientSurface::operator+=(const GradientSurface& other) {
  if (other.length_ != length_ || other.alphabet_size_ != alphabet_size_) {
    throw DomainError("gradient surfaces disagree on D or S");
  }
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += other.values_[k];
  return *this;
}

GradientSurface TimePredictor::gradient_surface(const MaskedSequence&) const {
  throw CapabilityError("predictor has no gradient surface");
}

void TimePredictor::check_input(const MaskedSequence& xt) const {
  if (xt.length() != length() || xt.alphabet_size() != alphabet_size()) {
    throw DomainError("predictor input disagrees with the model on D or S");
  }
}

// ---------------------------------------------------------------------------

ExactMarginalPredictor::ExactMarginalPredictor(CleanPredictor clean,
                                               std::shared_ptr<const TabularDistribution> p)
    : p_(std::move(p)) {
  if (!p_) throw DomainError("exact marginal predictor needs a distribution");
  if (clean.length() != p_->length() || clean.alphabet_size() != p_->alphabet_size()) {
    throw DomainError("clean predictor and distribution disagree on D or S");
  }
  clean_values_ = clean.tabulate();
  std::uint64_t contexts = 0;
  try {
    contexts = state_count(p_->length(), p_->alphabet_size() + 1);
  } catch (const SizeError&) {
    return;
  }
  if (contexts > kMaxMarginalTable) return;
  table_.assign(contexts, std::numeric_limits<double>::quiet_NaN());
  const auto weights = p_->weights();
  for (std::uint64_t idx = 0; idx < contexts; ++idx) {
    const MaskedSequence xt = decode_masked(idx, p_->length(), p_->alphabet_size());
    double mass = 0.0;
    double acc = 0.0;
    for_each_completion(xt, [&](std::uint64_t index, std::span<const Token>) {
      mass += weights[index];
      acc += weights[index] * clean_values_[index];
    });
    if (mass > 0.0) table_[idx] = acc / mass;
  }
}

double ExactMarginalPredictor::expectation(const MaskedSequence& xt) const {
  check_input(xt);
  if (!table_.empty()) {
    const double v = table_[encode_masked_index(xt)];
    if (!std::isnan(v)) return v;
    consistent_completions(xt, *p_);  // throws UnsupportedContext
  }
  double acc = 0.0;
  for (const auto& c : consistent_completions(xt, *p_)) acc += c.weight * clean_values_[c.index];
  return acc;
}

double ExactMarginalPredictor::likelihood(const MaskedSequence& xt) const {
  return clamp_likelihood(expectation(xt));
}

std::shared_ptr<ExactMarginalPredictor> exact_marginal_predictor(
    const CleanPredictor& clean, std::shared_ptr<const TabularDistribution> p) {
  return std::make_shared<ExactMarginalPredictor>(clean, std::move(p));
}

// ---------------------------------------------------------------------------

ProductOfMarginalsPredictor::ProductOfMarginalsPredictor(CleanPredictor clean,
                                                         std::shared_ptr<const Denoiser> denoiser,
                                                         std::size_t n_samples, std::uint64_t seed)
    : clean_(std::move(clean)), denoiser_(std::move(denoiser)), n_samples_(n_samples), seed_(seed) {
  if (n_samples_ == 0) throw DomainError("n_samples must be at least 1");
  if (!denoiser_ || denoiser_->length() != clean_.length() ||
      denoiser_->alphabet_size() != clean_.alphabet_size()) {
    throw DomainError("denoiser and clean predictor disagree on D or S");
  }
}

double ProductOfMarginalsPredictor::likelihood(const MaskedSequence& xt) const {
  RandomSource rng(seed_, encode_masked_index(xt));
  return likelihood(xt, rng);
}

double ProductOfMarginalsPredictor::likelihood(const MaskedSequence& xt, RandomSource& rng) const {
  check_input(xt);
  if (xt.is_clean()) return clamp_likelihood(clean_(xt.to_clean()));
  const PerPositionPosterior post = denoiser_->posterior(xt);
  const auto free = xt.masked_positions();
  MaskedSequence draw = xt;
  double acc = 0.0;
  for (std::size_t n = 0; n < n_samples_; ++n) {
    for (int pos : free) draw.set(pos, static_cast<Token>(rng.categorical(post.row(pos))));
    acc += clean_(draw.to_clean());
  }
  return clamp_likelihood(acc / static_cast<double>(n_samples_));
}

double ProductOfMarginalsPredictor::exact_expectation(const MaskedSequence& xt) const {
  check_input(xt);
  const PerPositionPosterior post = denoiser_->posterior(xt);
  double acc = 0.0;
  for_each_completion(xt, [&](std::uint64_t index, std::span<const Token> tokens) {
    double w = 1.0;
    for (int pos : xt.masked_positions()) {
      w *= post(pos, tokens[static_cast<std::size_t>(pos)]);
    }
    if (w > 0.0) acc += w * clean_(decode_index(index, xt.length(), xt.alphabet_size()));
  });
  return acc;
}

// ---------------------------------------------------------------------------

PottsClassifier::PottsClassifier(int length, int alphabet_size, Link link, bool pairwise)
    : length_(length), alphabet_size_(alphabet_size), link_(link), pairwise_enabled_(pairwise) {
  Alphabet check(alphabet_size);
  if (length <= 0) throw DomainError("sequence length must be positive");
  const auto radix = static_cast<std::size_t>(alphabet_size + 1);
  fields_.assign(static_cast<std::size_t>(length) * radix, 0.0);
  const auto pairs = static_cast<std::size_t>(length) * static_cast<std::size_t>(length - 1) / 2;
  couplings_.assign(pairwise ? pairs * radix * radix : 0, 0.0);
}

std::size_t PottsClassifier::pair_block(int d, int e) const {
  // Row-major upper triangle: pairs (0,1), (0,2), ..., (1,2), ...
  const auto n = static_cast<std::size_t>(length_);
  const auto dd = static_cast<std::size_t>(d);
  const auto ee = static_cast<std::size_t>(e);
  const std::size_t before = dd * n - dd * (dd + 1) / 2;
  const auto radix = static_cast<std::size_t>(alphabet_size_ + 1);
  return (before + (ee - dd - 1)) * radix * radix;
}

double& PottsClassifier::coupling(int d, Token a, int e, Token b) {
  if (!pairwise_enabled_) throw CapabilityError("classifier has no pairwise terms");
  if (d > e) {
    std::swap(d, e);
    std::swap(a, b);
  }
  if (d == e) throw DomainError("coupling needs two distinct positions");
  return couplings_[pair_block(d, e) + static_cast<std::size_t>(a) * (alphabet_size_ + 1) +
                    static_cast<std::size_t>(b)];
}

double PottsClassifier::coupling(int d, Token a, int e, Token b) const {
  return const_cast<PottsClassifier*>(this)->coupling(d, a, e, b);
}

double PottsClassifier::logit(const MaskedSequence& xt) const {
  check_input(xt);
  double z = bias_;
  for (int d = 0; d < length_; ++d) z += fields_[field_index(d, xt[d])];
  if (pairwise_enabled_) {
    const auto radix = static_cast<std::size_t>(alphabet_size_ + 1);
    for (int d = 0; d < length_; ++d) {
      for (int e = d + 1; e < length_; ++e) {
        z += couplings_[pair_block(d, e) + static_cast<std::size_t>(xt[d]) * radix +
                        static_cast<std::size_t>(xt[e])];
      }
    }
  }
  return z;
}

double PottsClassifier::likelihood(const MaskedSequence& xt) const {
  const double z = logit(xt);
  if (link_ == Link::kLogistic) return clamp_likelihood(sigmoid(z));
  return clamp_likelihood(std::exp(std::min(z, 0.0)));
}

double PottsClassifier::log_likelihood_relaxed(std::span<const double> x) const {
  const auto radix = static_cast<std::size_t>(alphabet_size_ + 1);
  if (x.size() != static_cast<std::size_t>(length_) * radix) {
    throw DomainError("relaxed input must be D x (S+1)");
  }
  double z = bias_;
  for (std::size_t k = 0; k < fields_.size(); ++k) z += fields_[k] * x[k];
  if (pairwise_enabled_) {
    for (int d = 0; d < length_; ++d) {
      for (int e = d + 1; e < length_; ++e) {
        const std::size_t block = pair_block(d, e);
        for (std::size_t a = 0; a < radix; ++a) {
          const double xa = x[static_cast<std::size_t>(d) * radix + a];
          if (xa == 0.0) continue;
          for (std::size_t b = 0; b < radix; ++b) {
            z += couplings_[block + a * radix + b] * xa * x[static_cast<std::size_t>(e) * radix + b];
          }
        }
      }
    }
  }
  if (link_ == Link::kLogistic) return log_sigmoid(z);
  return std::min(z, 0.0);
}

GradientSurface PottsClassifier::gradient_surface(const MaskedSequence& xt) const {
  const double z = logit(xt);
  // d log p / dz.
  const double outer = link_ == Link::kLogistic ? 1.0 - sigmoid(z) : (z < 0.0 ? 1.0 : 0.0);
  GradientSurface g(length_, alphabet_size_);
  const auto radix = static_cast<std::size_t>(alphabet_size_ + 1);
  for (int d = 0; d < length_; ++d) {
    for (Token c = 0; c <= alphabet_size_; ++c) {
      double dz = fields_[field_index(d, c)];
      if (pairwise_enabled_) {
        for (int e = 0; e < length_; ++e) {
          if (e == d) continue;
          if (d < e) {
            dz += couplings_[pair_block(d, e) + static_cast<std::size_t>(c) * radix +
                             static_cast<std::size_t>(xt[e])];
          } else {
            dz += couplings_[pair_block(e, d) + static_cast<std::size_t>(xt[e]) * radix +
                             static_cast<std::size_t>(c)];
          }
        }
      }
      g(d, c) = outer * dz;
    }
  }
  return g;
}

nlohmann::json PottsClassifier::to_json() const {
  return nlohmann::json{{"type", "potts"},
                        {"D", length_},
                        {"S", alphabet_size_},
                        {"link", link_ == Link::kLogistic ? "logistic" : "log_linear"},
                        {"bias", bias_},
                        {"fields", fields_},
                        {"pairwise", pairwise_enabled_},
                        {"couplings", couplings_}};
}

PottsClassifier PottsClassifier::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DomainError("classifier JSON must be an object");
  static const std::vector<std::string> keys = {"type",   "D",      "S",        "link",
                                                "bias", "fields", "pairwise", "couplings"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw DomainError("unknown key in classifier JSON: " + key);
    }
  }
  if (j.contains("type") && j.at("type") != "potts") throw DomainError("classifier type must be potts");
  const std::string link = j.value("link", "logistic");
  if (link != "logistic" && link != "log_linear") throw DomainError("unknown link: " + link);
  PottsClassifier out(j.at("D").get<int>(), j.at("S").get<int>(),
                      link == "logistic" ? Link::kLogistic : Link::kLogLinear,
                      j.value("pairwise", true));
  out.bias_ = j.at("bias").get<double>();
  auto fields = j.at("fields").get<std::vector<double>>();
  auto couplings = j.value("couplings", std::vector<double>{});
  if (fields.size() != out.fields_.size() || couplings.size() != out.couplings_.size()) {
    throw DomainError("classifier JSON has wrongly sized parameter arrays");
  }
  out.fields_ = std::move(fields);
  out.couplings_ = std::move(couplings);
  return out;
}

PottsClassifier train_noisy_classifier(std::span<const LabeledSequence> data,
                                       const ClassifierTrainingOptions& options,
                                       RandomSource& rng) {
  if (data.empty()) throw DomainError("train_noisy_classifier: empty data");
  const int length = data.front().sequence.length();
  const int s = data.front().sequence.alphabet_size();
  std::size_t positives = 0;
  for (const auto& d : data) {
    if (d.sequence.length() != length || d.sequence.alphabet_size() != s) {
      throw DomainError("train_noisy_classifier: sequences disagree on D or S");
    }
    positives += d.label >= 0.5;
  }
  if (positives == 0 || positives == data.size()) {
    throw DomainError("train_noisy_classifier: need at least one positive and one negative");
  }

  PottsClassifier model(length, s, PottsClassifier::Link::kLogistic, options.pairwise);
  const auto radix = static_cast<std::size_t>(s + 1);
  const Token mask = s;
  std::vector<double> g_fields(model.field_params().size());
  std::vector<double> g_couplings(model.coupling_params().size());
  const double n = static_cast<double>(data.size());
  const std::size_t copies = std::max<std::size_t>(options.copies_per_epoch, 1);

  auto run_epochs = [&](std::size_t epochs, bool renoise, bool mask_only) {
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
      std::fill(g_fields.begin(), g_fields.end(), 0.0);
      std::fill(g_couplings.begin(), g_couplings.end(), 0.0);
      double g_bias = 0.0;
      const std::size_t reps = renoise ? copies : 1;
      const double scale = 1.0 / (n * static_cast<double>(reps));
      for (const auto& example : data) {
        const double y = example.label >= 0.5 ? 1.0 : 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
          const MaskedSequence xt = renoise
                                        ? mask_forward(example.sequence, rng.uniform(),
                                                       options.schedule, rng)
                                        : MaskedSequence(example.sequence);
          const double residual = (sigmoid(model.logit(xt)) - y) * scale;
          g_bias += residual;
          for (int d = 0; d < length; ++d) g_fields[model.field_index(d, xt[d])] += residual;
          if (options.pairwise) {
            for (int d = 0; d < length; ++d) {
              for (int e = d + 1; e < length; ++e) {
                g_couplings[model.pair_block(d, e) + static_cast<std::size_t>(xt[d]) * radix +
                            static_cast<std::size_t>(xt[e])] += residual;
              }
            }
          }
        }
      }
      const double lr = options.learning_rate;
      auto fields = model.field_params();
      auto couplings = model.coupling_params();
      if (!mask_only) model.bias() -= lr * g_bias;
      for (int d = 0; d < length; ++d) {
        for (Token c = 0; c <= s; ++c) {
          if (mask_only && c != mask) continue;
          fields[model.field_index(d, c)] -= lr * g_fields[model.field_index(d, c)];
        }
      }
      for (int d = 0; d < length && options.pairwise; ++d) {
        for (int e = d + 1; e < length; ++e) {
          const std::size_t block = model.pair_block(d, e);
          for (std::size_t a = 0; a < radix; ++a) {
            for (std::size_t b = 0; b < radix; ++b) {
              if (mask_only && a != static_cast<std::size_t>(mask) &&
                  b != static_cast<std::size_t>(mask)) {
                continue;
              }
              const std::size_t k = block + a * radix + b;
              couplings[k] -= lr * (g_couplings[k] + options.pairwise_l2 / n * couplings[k]);
            }
          }
        }
      }
      if (!std::isfinite(model.bias())) {
        throw TrainingError("train_noisy_classifier: diverged at epoch " + std::to_string(epoch),
                            epoch);
      }
    }
  };

  if (options.two_stage) {
    run_epochs(options.epochs / 2, /*renoise=*/false, /*mask_only=*/false);
    run_epochs(options.epochs - options.epochs / 2, /*renoise=*/true, /*mask_only=*/true);
  } else {
    run_epochs(options.epochs, /*renoise=*/true, /*mask_only=*/false);
  }
  return model;
}

// ---------------------------------------------------------------------------

double threshold_likelihood(double mu, double sigma, double y_star) {
  if (!(sigma > 0.0)) throw DomainError("threshold regressor needs sigma > 0");
  if (std::isinf(sigma)) return 0.5;
  // 1 - Phi(z) = erfc(z / sqrt 2) / 2
  return 0.5 * std::erfc((y_star - mu) / (sigma * std::sqrt(2.0)));
}

ThresholdPredictor::ThresholdPredictor(int length, int alphabet_size, Moment mu, Moment sigma,
                                       double y_star)
    : length_(length),
      alphabet_size_(alphabet_size),
      mu_(std::move(mu)),
      sigma_(std::move(sigma)),
      y_star_(y_star) {
  if (!mu_ || !sigma_) throw DomainError("threshold predictor needs mu and sigma");
}

double ThresholdPredictor::likelihood(const MaskedSequence& xt) const {
  check_input(xt);
  return clamp_likelihood(threshold_likelihood(mu_(xt), sigma_(xt), y_star_));
}

// ---------------------------------------------------------------------------

ProductPredictor::ProductPredictor(std::vector<TimePredictorPtr> parts) : parts_(std::move(parts)) {
  if (parts_.empty()) throw DomainError("product predictor needs at least one part");
  for (const auto& p : parts_) {
    if (!p || p->length() != parts_.front()->length() ||
        p->alphabet_size() != parts_.front()->alphabet_size()) {
      throw DomainError("product predictor parts disagree on D or S");
    }
  }
}

double ProductPredictor::likelihood(const MaskedSequence& xt) const {
  if (parts_.size() == 1) return parts_.front()->likelihood(xt);
  double v = 1.0;
  for (const auto& p : parts_) v *= p->likelihood(xt);
  return clamp_likelihood(v);
}

bool ProductPredictor::has_gradient() const {
  return std::all_of(parts_.begin(), parts_.end(), [](const auto& p) { return p->has_gradient(); });
}

GradientSurface ProductPredictor::gradient_surface(const MaskedSequence& xt) const {
  if (!has_gradient()) throw CapabilityError("a product part lacks a gradient surface");
  GradientSurface g = parts_.front()->gradient_surface(xt);
  for (std::size_t k = 1; k < parts_.size(); ++k) g += parts_[k]->gradient_surface(xt);
  return g;
}

// ---------------------------------------------------------------------------

std::vector<LabeledSequence> load_labeled_csv(const std::string& path, int alphabet_size) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open labeled CSV: " + path);
  std::vector<LabeledSequence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 'sequence,label'");
    }
    std::string seq = line.substr(0, comma);
    std::string label = line.substr(comma + 1);
    if (line_no == 1 && seq == "sequence") continue;
    double value = 0.0;
    if (label == "true" || label == "True" || label == "TRUE") {
      value = 1.0;
    } else if (label == "false" || label == "False" || label == "FALSE") {
      value = 0.0;
    } else {
      try {
        std::size_t used = 0;
        value = std::stod(label, &used);
        if (used != label.size()) throw std::invalid_argument(label);
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": bad label '" + label + "'");
      }
    }
    out.push_back({parse_sequence(seq, alphabet_size), value});
  }
  return out;
}

}  // namespace guidesampler
