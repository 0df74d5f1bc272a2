#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "guidesampler/predictors.hpp"
#include "guidesampler/sequence.hpp"
#include "guidesampler/tabular.hpp"

namespace guidesampler {

/// p(y | x)^gamma p(x), normalized. Throws DomainError on a zero normalizer.
TabularDistribution brute_force_posterior(const TabularDistribution& p, const CleanPredictor& clean,
                                          double gamma);

/// Counts per sequence index over the S^D clean sequences.
class EmpiricalDistribution {
 public:
  EmpiricalDistribution(int length, int alphabet_size);

  template <class Range>
  static EmpiricalDistribution from_samples(int length, int alphabet_size, const Range& samples) {
    EmpiricalDistribution e(length, alphabet_size);
    for (const auto& x : samples) e.add(x);
    return e;
  }

  void add(const TokenSequence& x);
  void add_index(std::uint64_t index);

  int length() const noexcept { return length_; }
  int alphabet_size() const noexcept { return alphabet_size_; }
  std::uint64_t total() const noexcept { return total_; }
  std::span<const std::uint64_t> counts() const noexcept { return counts_; }
  std::vector<double> probabilities() const;

 private:
  int length_;
  int alphabet_size_;
  std::uint64_t total_ = 0;
  std::vector<std::uint64_t> counts_;
};

/// Half the L1 distance. Throws SizeError on mismatched supports.
double tv_distance(std::span<const double> a, std::span<const double> b);
double tv_distance(const TabularDistribution& a, const TabularDistribution& b);
double tv_distance(const EmpiricalDistribution& a, const TabularDistribution& b);
double tv_distance(const EmpiricalDistribution& a, const EmpiricalDistribution& b);

struct TestVerdict {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
  double alpha = 0.0;
  bool pass = true;

  nlohmann::json to_json() const;
};

inline constexpr double kChiSquareAlpha = 0.001;
inline constexpr double kKsAlpha = 0.01;

/// Pearson goodness of fit. Cells with expected count below 5 are pooled into
/// one overflow cell. Throws DomainError when the sample is empty.
TestVerdict chi_square_gof(const EmpiricalDistribution& emp, const TabularDistribution& expected,
                           double alpha = kChiSquareAlpha);
TestVerdict chi_square_gof(std::span<const std::uint64_t> counts,
                           std::span<const double> expected_probs, double alpha = kChiSquareAlpha);

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
TestVerdict ks_test(std::span<const double> values, const std::function<double(double)>& cdf,
                    double alpha = kKsAlpha);
/// KS against Uniform(0, 1). Throws DomainError for values outside [0, 1].
TestVerdict ks_uniform(std::span<const double> values, double alpha = kKsAlpha);
/// Two-sample KS.
TestVerdict ks_two_sample(std::span<const double> a, std::span<const double> b,
                          double alpha = kKsAlpha);

/// Asymptotic Kolmogorov survival function P(K > lambda).
double kolmogorov_survival(double lambda);
/// Upper tail of the chi-square distribution.
double chi_square_survival(double statistic, double dof);

/// Welch z-test of H1: mean(a) > mean(b). Passes when p < alpha.
TestVerdict mean_greater_test(std::span<const double> a, std::span<const double> b,
                              double alpha = 0.01);

double mean(std::span<const double> v);
double variance(std::span<const double> v);

/// Area under the ROC curve with tie correction. Throws DomainError if one class is empty.
double auroc(std::span<const double> scores, const std::vector<bool>& labels);

}  // namespace guidesampler
