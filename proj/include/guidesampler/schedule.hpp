#pragma once

#include <string>

namespace guidesampler {

/// Interpolation schedule kappa(t) = 1 - (1 - t)^a, the probability that a
/// position is unmasked at time t. a = 1 is the uniform schedule kappa(t) = t.
///
/// kappa is the CDF of a single position's jump time, so inverse() maps a
/// uniform draw to a jump time.
class InterpolationSchedule {
 public:
  static InterpolationSchedule uniform() { return InterpolationSchedule(1.0); }
  static InterpolationSchedule power(double exponent);

  double kappa(double t) const;
  double kappa_dot(double t) const;
  /// kappa_dot / (1 - kappa), the per-position unmasking hazard.
  double hazard(double t) const;
  double inverse(double u) const;

  double exponent() const noexcept { return exponent_; }
  bool is_uniform() const noexcept { return exponent_ == 1.0; }
  std::string name() const;

 private:
  explicit InterpolationSchedule(double exponent) : exponent_(exponent) {}
  double exponent_;
};

}  // namespace guidesampler
