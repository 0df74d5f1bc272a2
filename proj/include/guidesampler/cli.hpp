#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "guidesampler/bench.hpp"
#include "guidesampler/denoiser.hpp"
#include "guidesampler/predictors.hpp"

namespace guidesampler {

enum ExitCode : int { kExitOk = 0, kExitCheckFailure = 1, kExitConfigError = 2, kExitRuntimeError = 3 };

/// Everything a run needs. Paths are kept as given; files are read at run time.
struct RunConfig {
  std::string command;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out;

  // verify
  std::vector<std::string> only;

  // sample
  std::string model;
  std::string predictor;
  std::string early_predictor;
  std::string conditional_model;
  std::string mode = "none";
  double gamma = 1.0;
  std::size_t n = 10;
  std::string sampler = "aoarm";
  double dt = 0.01;
  double temperature = 1.0;
  double wildtype_weight = 0.0;
  std::string wildtype;
  /// Staged guidance starts with the early predictor and switches here.
  double switch_time = 0.0;

  // campaign
  std::string landscape;
  std::optional<CampaignConfig> campaign;

  nlohmann::json to_json() const;
  /// Unknown keys and wrong types raise ConfigError.
  static RunConfig from_json(const nlohmann::json& j);
};

/// Tabular files (with "weights") load as exact denoisers, files with
/// "single_site" as parametric ones. Throws ConfigError.
std::shared_ptr<const Denoiser> load_model(const std::string& path);

/// {"type": "potts", ...}, {"type": "exact_marginal", "distribution", "values"}
/// or {"type": "product", "parts": [...]}. Throws ConfigError.
TimePredictorPtr load_predictor(const std::string& path);
TimePredictorPtr predictor_from_json(const nlohmann::json& j);

/// guidesampler <verify|sample|campaign> [options]; returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace guidesampler
