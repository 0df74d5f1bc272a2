#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace guidesampler {

struct AcceptanceOptions {
  std::uint64_t seed = 20240611;
  unsigned threads = 1;
  /// Scratch space for the determinism check.
  std::filesystem::path workdir;
};

struct CheckResult {
  std::string id;    // "1" .. "9", companions "3b", "5b"
  std::string name;
  bool pass = false;
  std::string detail;
  nlohmann::json values;
  double seconds = 0.0;

  /// Deterministic fields only.
  nlohmann::json to_json() const;
};

struct CheckInfo {
  std::string id;
  std::string name;
  std::string summary;
};

const std::vector<CheckInfo>& acceptance_checks();

/// Accepts either the check name or its id. Throws ConfigError for unknown names.
CheckResult run_check(const std::string& name_or_id, const AcceptanceOptions& options);

/// "criterion 1  posterior_exactness  PASS  detail"
std::string format_check_line(const CheckResult& r, bool with_time);

}  // namespace guidesampler
