#include "guidesampler/schedule.hpp"

#include <cmath>
#include <sstream>

#include "guidesampler/errors.hpp"

namespace guidesampler {

namespace {

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("time must lie in [0, 1]");
}

}  // namespace

InterpolationSchedule InterpolationSchedule::power(double exponent) {
  if (!(exponent > 0.0) || !std::isfinite(exponent)) {
    throw DomainError("schedule exponent must be positive and finite");
  }
  return InterpolationSchedule(exponent);
}

double InterpolationSchedule::kappa(double t) const {
  check_time(t);
  if (is_uniform()) return t;
  return 1.0 - std::pow(1.0 - t, exponent_);
}

double InterpolationSchedule::kappa_dot(double t) const {
  check_time(t);
  if (is_uniform()) return 1.0;
  return exponent_ * std::pow(1.0 - t, exponent_ - 1.0);
}

double InterpolationSchedule::hazard(double t) const {
  check_time(t);
  // (a (1-t)^(a-1)) / (1-t)^a simplifies to a / (1-t).
  return exponent_ / (1.0 - t);
}

double InterpolationSchedule::inverse(double u) const {
  check_time(u);
  if (is_uniform()) return u;
  return 1.0 - std::pow(1.0 - u, 1.0 / exponent_);
}

std::string InterpolationSchedule::name() const {
  if (is_uniform()) return "uniform";
  std::ostringstream os;
  os << "power(" << exponent_ << ")";
  return os.str();
}

}  // namespace guidesampler
