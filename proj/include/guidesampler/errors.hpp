#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace guidesampler {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (t outside [0,1], sigma <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Enumeration or allocation cap exceeded.
class SizeError : public Error {
 public:
  using Error::Error;
};

// A masked context with no consistent completion of positive mass.
class UnsupportedContext : public Error {
 public:
  UnsupportedContext(const std::string& what, std::vector<int> positions)
      : Error(what), positions_(std::move(positions)) {}
  const std::vector<int>& positions() const noexcept { return positions_; }

 private:
  std::vector<int> positions_;
};

// Requested feature the component does not provide (e.g. TAG without a gradient surface).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFeature : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t step) : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class DegenerateStep : public Error {
 public:
  DegenerateStep(const std::string& what, std::size_t step) : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace guidesampler
