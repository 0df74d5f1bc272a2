#include "guidesampler/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "guidesampler/acceptance.hpp"
#include "guidesampler/errors.hpp"
#include "guidesampler/sampling.hpp"
#include "guidesampler/tabular.hpp"

namespace guidesampler {

namespace fs = std::filesystem;

namespace {

nlohmann::json read_json(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(what + ": cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(what + ": " + path + " is not valid JSON (" + e.what() + ")");
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

const std::vector<std::string> kRunKeys{
    "command",         "seed",        "threads",   "out",     "only",
    "model",           "predictor",   "early_predictor",      "conditional_model",
    "mode",            "gamma",       "n",         "sampler", "dt",
    "temperature",     "wildtype_weight",          "wildtype", "switch_time",
    "landscape",       "campaign"};

template <class T>
void take(const nlohmann::json& j, const char* key, T& target) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config: key '") + key + "' has the wrong type");
  }
}

std::string number_text(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j{{"command", command},
                   {"seed", seed},
                   {"threads", threads},
                   {"out", out}};
  if (command == "verify") {
    j["only"] = only;
  } else if (command == "sample") {
    j.update({{"model", model},
              {"predictor", predictor},
              {"early_predictor", early_predictor},
              {"conditional_model", conditional_model},
              {"mode", mode},
              {"gamma", gamma},
              {"n", n},
              {"sampler", sampler},
              {"dt", dt},
              {"temperature", temperature},
              {"wildtype_weight", wildtype_weight},
              {"wildtype", wildtype},
              {"switch_time", switch_time}});
  } else if (command == "campaign") {
    j["landscape"] = landscape;
    j["campaign"] = campaign.value_or(CampaignConfig{}).to_json();
  }
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(kRunKeys.begin(), kRunKeys.end(), key) == kRunKeys.end()) {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  RunConfig c;
  take(j, "command", c.command);
  take(j, "seed", c.seed);
  take(j, "threads", c.threads);
  take(j, "out", c.out);
  take(j, "only", c.only);
  take(j, "model", c.model);
  take(j, "predictor", c.predictor);
  take(j, "early_predictor", c.early_predictor);
  take(j, "conditional_model", c.conditional_model);
  take(j, "mode", c.mode);
  take(j, "gamma", c.gamma);
  take(j, "n", c.n);
  take(j, "sampler", c.sampler);
  take(j, "dt", c.dt);
  take(j, "temperature", c.temperature);
  take(j, "wildtype_weight", c.wildtype_weight);
  take(j, "wildtype", c.wildtype);
  take(j, "switch_time", c.switch_time);
  take(j, "landscape", c.landscape);
  if (j.contains("campaign")) c.campaign = CampaignConfig::from_json(j.at("campaign"));
  return c;
}

std::shared_ptr<const Denoiser> load_model(const std::string& path) {
  const nlohmann::json j = read_json(path, "model");
  try {
    if (j.is_object() && j.contains("weights")) {
      return std::make_shared<ExactDenoiser>(
          std::make_shared<const TabularDistribution>(TabularDistribution::from_json(j)));
    }
    if (j.is_object() && j.contains("single_site")) {
      return std::make_shared<ParametricDenoiser>(ParametricDenoiser::from_json(j));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model " + path + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError("model " + path + ": " + e.what());
  }
  throw ConfigError("model " + path + ": neither a tabular nor a parametric model");
}

TimePredictorPtr predictor_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type")) throw ConfigError("predictor: missing \"type\"");
  try {
    const std::string type = j.at("type").get<std::string>();
    if (type == "potts") return std::make_shared<PottsClassifier>(PottsClassifier::from_json(j));
    if (type == "exact_marginal") {
      for (const auto& [key, value] : j.items()) {
        if (key != "type" && key != "distribution" && key != "values") {
          throw ConfigError("predictor: unknown key '" + key + "'");
        }
      }
      auto p = std::make_shared<const TabularDistribution>(
          TabularDistribution::from_json(j.at("distribution")));
      auto values = j.at("values").get<std::vector<double>>();
      if (values.size() != p->size()) throw ConfigError("predictor: values do not cover S^D sequences");
      return exact_marginal_predictor(
          CleanPredictor::tabulated(p->length(), p->alphabet_size(), std::move(values)), p);
    }
    if (type == "product") {
      for (const auto& [key, value] : j.items()) {
        if (key != "type" && key != "parts") throw ConfigError("predictor: unknown key '" + key + "'");
      }
      std::vector<TimePredictorPtr> parts;
      for (const auto& part : j.at("parts")) parts.push_back(predictor_from_json(part));
      if (parts.empty()) throw ConfigError("predictor: product needs at least one part");
      return std::make_shared<ProductPredictor>(std::move(parts));
    }
    throw ConfigError("predictor: unknown type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("predictor: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("predictor: ") + e.what());
  }
}

TimePredictorPtr load_predictor(const std::string& path) {
  return predictor_from_json(read_json(path, "predictor"));
}

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out) {
  if (!cfg.model.empty()) load_model(cfg.model);
  std::vector<std::string> names = cfg.only;
  if (names.empty()) {
    for (const auto& info : acceptance_checks()) names.push_back(info.name);
  }
  for (const auto& name : names) {
    const auto& all = acceptance_checks();
    if (std::none_of(all.begin(), all.end(),
                     [&](const CheckInfo& c) { return c.name == name || c.id == name; })) {
      throw ConfigError("verify: unknown check '" + name + "'");
    }
  }
  AcceptanceOptions options;
  options.seed = cfg.seed;
  options.threads = cfg.threads;
  if (!cfg.out.empty()) {
    fs::create_directories(cfg.out);
    options.workdir = fs::path(cfg.out) / "determinism";
  }
  std::vector<std::string> failing;
  nlohmann::json results = nlohmann::json::array();
  nlohmann::json timing = nlohmann::json::object();
  for (const auto& name : names) {
    const CheckResult r = run_check(name, options);
    out << format_check_line(r, false) << "\n" << std::flush;
    if (!r.pass) failing.push_back(r.name);
    results.push_back(r.to_json());
    timing[r.name] = r.seconds;
  }
  out << names.size() - failing.size() << "/" << names.size() << " checks passed";
  if (!failing.empty()) {
    out << "; failing:";
    for (const auto& f : failing) out << " " << f;
  }
  out << "\n";
  if (!cfg.out.empty()) {
    write_file(fs::path(cfg.out) / "verify.json", dump(results));
    write_file(fs::path(cfg.out) / "timing.json", dump(timing));
    write_file(fs::path(cfg.out) / "resolved_config.json", dump(cfg.to_json()));
  }
  return failing.empty() ? kExitOk : kExitCheckFailure;
}

int cmd_sample(const RunConfig& cfg, std::ostream& out) {
  if (cfg.model.empty()) throw ConfigError("sample: --model is required");
  if (cfg.out.empty()) throw ConfigError("sample: --out is required");
  if (cfg.n == 0) throw ConfigError("sample: --n must be positive");
  if (cfg.sampler != "aoarm" && cfg.sampler != "euler") {
    throw ConfigError("sample: unknown sampler '" + cfg.sampler + "'");
  }
  std::shared_ptr<const Denoiser> denoiser = load_model(cfg.model);
  const int length = denoiser->length();
  const int s = denoiser->alphabet_size();

  LogitModifier mod;
  mod.temperature = cfg.temperature;
  mod.wildtype_weight = cfg.wildtype_weight;
  try {
    if (!cfg.wildtype.empty()) mod.wildtype = parse_sequence(cfg.wildtype, s);
    mod.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("sample: ") + e.what());
  }
  if (mod.wildtype && mod.wildtype->length() != length) {
    throw ConfigError("sample: wild type length differs from the model");
  }
  if (!mod.is_identity()) denoiser = std::make_shared<ModifiedDenoiser>(denoiser, mod);

  GuidanceConfig guidance;
  try {
    guidance.mode = parse_guidance_mode(cfg.mode);
  } catch (const Error& e) {
    throw ConfigError(std::string("sample: ") + e.what());
  }
  guidance.gamma = cfg.gamma;
  guidance.switch_time = cfg.switch_time;
  if (!cfg.predictor.empty()) guidance.predictor = load_predictor(cfg.predictor);
  if (!cfg.early_predictor.empty()) guidance.early_predictor = load_predictor(cfg.early_predictor);
  if (!cfg.conditional_model.empty()) guidance.conditional_denoiser = load_model(cfg.conditional_model);
  try {
    guidance.validate(length, s);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("sample: ") + e.what());
  }
  if (cfg.sampler == "euler" && !(cfg.dt > 0.0 && cfg.dt <= 0.1)) {
    throw ConfigError("sample: --dt must lie in (0, 0.1]");
  }

  const auto schedule = InterpolationSchedule::uniform();
  SamplerDiagnostics diagnostics;
  const auto start = std::chrono::steady_clock::now();
  const auto results = run_chains(
      cfg.n, cfg.seed, cfg.threads,
      [&](RandomSource& rng, SamplerDiagnostics& d) {
        return cfg.sampler == "euler" ? euler_sample(*denoiser, guidance, schedule, cfg.dt, rng, &d)
                                      : aoarm_sample(*denoiser, guidance, rng, &d, schedule);
      },
      &diagnostics);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  std::string samples;
  std::string paths;
  for (const auto& r : results) {
    samples += to_string(r.sequence) + "\n";
    paths += r.path.to_json().dump() + "\n";
  }
  nlohmann::json diag = diagnostics.to_json();
  diag["n"] = cfg.n;
  diag["sampler"] = cfg.sampler;
  diag["mode"] = to_string(guidance.mode);
  write_file(dir / "samples.txt", samples);
  write_file(dir / "paths.jsonl", paths);
  write_file(dir / "diagnostics.json", dump(diag));
  write_file(dir / "resolved_config.json", dump(cfg.to_json()));
  write_file(dir / "timing.json", dump(nlohmann::json{{"wall_time", seconds}}));
  out << "wrote " << results.size() << " samples to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_campaign(const RunConfig& cfg, bool seed_given, std::ostream& out) {
  if (cfg.out.empty()) throw ConfigError("campaign: --out is required");
  CampaignConfig campaign = cfg.campaign.value_or(CampaignConfig{});
  if (!cfg.landscape.empty()) {
    campaign.landscape = LandscapeSpec::from_json(read_json(cfg.landscape, "landscape"));
  }
  campaign.threads = cfg.threads;
  if (seed_given) {
    for (std::size_t k = 0; k < campaign.seeds.size(); ++k) campaign.seeds[k] = cfg.seed + k;
  }
  if (campaign.seeds.empty()) throw ConfigError("campaign: no seeds");
  RunConfig resolved = cfg;
  resolved.campaign = campaign;

  const CampaignReport report = run_campaign(campaign);
  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  const std::string reference =
      campaign.gammas.empty() ? "unguided" : "guided_g" + number_text(campaign.gammas.front());
  write_file(dir / "campaign.csv", report.to_csv());
  write_file(dir / "summary.json", dump(report.summary()));
  write_file(dir / "landscape.json", dump(report.landscape_summary));
  write_file(dir / "timing.json", dump(report.timing(reference)));
  write_file(dir / "resolved_config.json", dump(resolved.to_json()));
  out << "wrote " << report.rows.size() << " rows to " << (dir / "campaign.csv").string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Guided discrete flow sampling: verification, sampling and campaigns", "guidesampler"};
  app.require_subcommand(0, 1);

  std::string config_path;
  bool print_config = false;
  RunConfig flags;
  std::string only;

  app.add_option("--config", config_path, "JSON run configuration");
  app.add_flag("--print-config", print_config, "Print the resolved configuration and exit");
  auto* seed_opt = app.add_option("--seed", flags.seed, "Random seed");
  auto* threads_opt = app.add_option("--threads", flags.threads, "Worker threads")->check(CLI::PositiveNumber);
  auto* out_opt = app.add_option("--out", flags.out, "Output directory");

  auto* verify = app.add_subcommand("verify", "Run the acceptance checks");
  verify->fallthrough();
  auto* only_opt = verify->add_option("--only", only, "Comma-separated check names or ids");
  auto* verify_model = verify->add_option("--model", flags.model, "Model file to validate");

  auto* sample = app.add_subcommand("sample", "Draw guided samples");
  sample->fallthrough();
  std::vector<CLI::Option*> sample_opts{
      sample->add_option("--model", flags.model, "Denoiser model JSON"),
      sample->add_option("--predictor", flags.predictor, "Predictor JSON"),
      sample->add_option("--early-predictor", flags.early_predictor, "Predictor used before --switch-time"),
      sample->add_option("--conditional-model", flags.conditional_model, "Conditional model for predictor-free guidance"),
      sample->add_option("--mode", flags.mode, "none|exact|tag|deg|predictor_free"),
      sample->add_option("--gamma", flags.gamma, "Guidance strength"),
      sample->add_option("--n", flags.n, "Number of samples"),
      sample->add_option("--sampler", flags.sampler, "aoarm|euler"),
      sample->add_option("--dt", flags.dt, "Euler step"),
      sample->add_option("--temperature", flags.temperature, "Denoiser temperature"),
      sample->add_option("--wildtype-weight", flags.wildtype_weight, "Wild-type logit bonus"),
      sample->add_option("--wildtype", flags.wildtype, "Wild-type sequence"),
      sample->add_option("--switch-time", flags.switch_time, "Time at which staged guidance switches predictors")};

  auto* campaign = app.add_subcommand("campaign", "Run the design campaign benchmark");
  campaign->fallthrough();
  auto* landscape_opt = campaign->add_option("--landscape", flags.landscape, "Landscape spec JSON");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    RunConfig cfg;
    bool seed_given = false;
    if (!config_path.empty()) {
      const nlohmann::json j = read_json(config_path, "config");
      cfg = RunConfig::from_json(j);
      seed_given = j.contains("seed");
    }
    if (const char* env = std::getenv("GUIDESAMPLER_SEED"); env != nullptr && *env != '\0') {
      try {
        std::size_t used = 0;
        cfg.seed = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument(env);
      } catch (const std::exception&) {
        throw ConfigError(std::string("GUIDESAMPLER_SEED is not an unsigned integer: ") + env);
      }
      seed_given = true;
    }
    if (seed_opt->count() > 0) {
      cfg.seed = flags.seed;
      seed_given = true;
    }
    if (threads_opt->count() > 0) cfg.threads = flags.threads;
    if (out_opt->count() > 0) cfg.out = flags.out;
    if (verify->parsed()) cfg.command = "verify";
    if (sample->parsed()) cfg.command = "sample";
    if (campaign->parsed()) cfg.command = "campaign";
    if (only_opt->count() > 0) cfg.only = split_list(only);
    if (verify_model->count() > 0) cfg.model = flags.model;
    // Each sample option maps onto the field of the same position in `flags`.
    const auto copy_if = [&](CLI::Option* opt, auto RunConfig::*field) {
      if (opt->count() > 0) cfg.*field = flags.*field;
    };
    copy_if(sample_opts[0], &RunConfig::model);
    copy_if(sample_opts[1], &RunConfig::predictor);
    copy_if(sample_opts[2], &RunConfig::early_predictor);
    copy_if(sample_opts[3], &RunConfig::conditional_model);
    copy_if(sample_opts[4], &RunConfig::mode);
    copy_if(sample_opts[5], &RunConfig::gamma);
    copy_if(sample_opts[6], &RunConfig::n);
    copy_if(sample_opts[7], &RunConfig::sampler);
    copy_if(sample_opts[8], &RunConfig::dt);
    copy_if(sample_opts[9], &RunConfig::temperature);
    copy_if(sample_opts[10], &RunConfig::wildtype_weight);
    copy_if(sample_opts[11], &RunConfig::wildtype);
    copy_if(sample_opts[12], &RunConfig::switch_time);
    copy_if(landscape_opt, &RunConfig::landscape);

    if (cfg.command.empty()) throw ConfigError("no command given (verify, sample or campaign)");
    if (cfg.command != "verify" && cfg.command != "sample" && cfg.command != "campaign") {
      throw ConfigError("unknown command '" + cfg.command + "'");
    }
    if (cfg.threads == 0) throw ConfigError("--threads must be positive");
    if (print_config) {
      out << dump(cfg.to_json());
      return kExitOk;
    }
    if (cfg.command == "verify") return cmd_verify(cfg, out);
    if (cfg.command == "sample") return cmd_sample(cfg, out);
    return cmd_campaign(cfg, seed_given, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const CapabilityError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const UnsupportedFeature& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}

}  // namespace guidesampler
