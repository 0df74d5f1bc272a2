#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "guidesampler/bench.hpp"
#include "guidesampler/cli.hpp"
#include "guidesampler/oracle.hpp"

using namespace guidesampler;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

struct Workspace {
  fs::path dir;
  std::vector<double> values;

  Workspace() : dir(fs::temp_directory_path() / "guidesampler_cli_test") {
    fs::remove_all(dir);
    fs::create_directories(dir);
    RandomSource rng(77);
    const auto p = gibbs_distribution(PottsEnergy::random(3, 3, 1.0, 0.5, rng));
    values.resize(27);
    for (double& v : values) v = 0.05 + 0.9 * rng.uniform();
    spit(dir / "model.json", p.to_json().dump());
    spit(dir / "pred.json",
         nlohmann::json{{"type", "exact_marginal"}, {"distribution", p.to_json()}, {"values", values}}.dump());
    const auto q = TabularDistribution::uniform(2, 3);
    spit(dir / "pred_small.json",
         nlohmann::json{{"type", "exact_marginal"}, {"distribution", q.to_json()}, {"values", std::vector<double>(9, 0.5)}}.dump());
    spit(dir / "broken.json", "{\"D\": 3, \"S\": 3, \"weights\": [0.5,");
  }
  ~Workspace() { fs::remove_all(dir); }

  std::string path(const char* name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("usage errors map to exit code 2") {
  CHECK(cli({}).code == kExitConfigError);
  CHECK(cli({"dance"}).code == kExitConfigError);
  CHECK(cli({"sample", "--bogus"}).code == kExitConfigError);
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({"verify", "--only", "nonexistent"}).code == kExitConfigError);
}

TEST_CASE("verify runs exactly the requested check") {
  const Run r = cli({"verify", "--only", "loss_identity_elbo", "--seed", "3"});
  CHECK(r.code == kExitOk);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 2);
  CHECK(r.out.find("loss_identity_elbo") != std::string::npos);

  const Run literal = cli({"verify", "--only", "loss_identity"});
  CHECK(literal.code == kExitCheckFailure);
  CHECK(literal.out.find("failing: loss_identity") != std::string::npos);
}

TEST_CASE("corrupted files are config errors") {
  Workspace ws;
  CHECK(cli({"verify", "--model", ws.path("broken.json")}).code == kExitConfigError);
  CHECK(cli({"sample", "--model", ws.path("broken.json"), "--out", ws.path("o")}).code == kExitConfigError);
  CHECK(cli({"sample", "--model", ws.path("missing.json"), "--out", ws.path("o")}).code == kExitConfigError);
  spit(ws.dir / "cfg.json", R"({"command": "sample", "modle": "x"})");
  CHECK(cli({"--config", ws.path("cfg.json")}).code == kExitConfigError);
}

TEST_CASE("sample validation") {
  Workspace ws;
  const Run missing = cli({"sample", "--model", ws.path("model.json"), "--mode", "deg", "--out", ws.path("o")});
  CHECK(missing.code == kExitConfigError);
  CHECK(missing.err.find("predictor") != std::string::npos);
  CHECK(cli({"sample", "--model", ws.path("model.json"), "--predictor", ws.path("pred_small.json"), "--mode", "deg",
             "--out", ws.path("o")})
            .code == kExitConfigError);
  CHECK(cli({"sample", "--model", ws.path("model.json"), "--sampler", "gillespie", "--out", ws.path("o")}).code ==
        kExitConfigError);
}

TEST_CASE("sample is byte-reproducible") {
  Workspace ws;
  const std::vector<std::string> args{"sample", "--model", ws.path("model.json"), "--predictor", ws.path("pred.json"),
                                      "--mode", "exact", "--sampler", "euler", "--dt", "0.02", "--n", "10",
                                      "--seed", "9", "--out", ws.path("run")};
  REQUIRE(cli(args).code == kExitOk);
  std::vector<std::string> first;
  for (const char* f : {"samples.txt", "paths.jsonl", "diagnostics.json", "resolved_config.json"}) {
    first.push_back(slurp(ws.dir / "run" / f));
  }
  CHECK(std::count(first[0].begin(), first[0].end(), '\n') == 10);
  CHECK(std::count(first[1].begin(), first[1].end(), '\n') == 10);
  REQUIRE(cli(args).code == kExitOk);
  int k = 0;
  for (const char* f : {"samples.txt", "paths.jsonl", "diagnostics.json", "resolved_config.json"}) {
    CHECK(slurp(ws.dir / "run" / f) == first[static_cast<std::size_t>(k++)]);
  }
  CHECK(fs::exists(ws.dir / "run" / "timing.json"));
}

TEST_CASE("seed precedence: file, then environment, then flag") {
  Workspace ws;
  spit(ws.dir / "cfg.json", R"({"command": "verify", "seed": 5})");
  auto seed_of = [&](std::vector<std::string> extra) {
    std::vector<std::string> args{"--config", ws.path("cfg.json"), "--print-config"};
    args.insert(args.end(), extra.begin(), extra.end());
    const Run r = cli(args);
    REQUIRE(r.code == kExitOk);
    return nlohmann::json::parse(r.out)["seed"].get<std::uint64_t>();
  };
  CHECK(seed_of({}) == 5);
  setenv("GUIDESAMPLER_SEED", "6", 1);
  CHECK(seed_of({}) == 6);
  CHECK(seed_of({"--seed", "7"}) == 7);
  setenv("GUIDESAMPLER_SEED", "six", 1);
  CHECK(cli({"--config", ws.path("cfg.json"), "--print-config"}).code == kExitConfigError);
  unsetenv("GUIDESAMPLER_SEED");
}

TEST_CASE("gamma = 0 matches unguided sampling") {
  Workspace ws;
  const std::vector<std::string> base{"sample", "--model", ws.path("model.json"), "--predictor",
                                      ws.path("pred.json"), "--n", "5000", "--seed"};
  auto run = [&](std::vector<std::string> extra, const char* seed, const char* out) {
    auto args = base;
    args.push_back(seed);
    args.insert(args.end(), extra.begin(), extra.end());
    args.push_back("--out");
    args.push_back(ws.path(out));
    REQUIRE(cli(args).code == kExitOk);
    std::ifstream in(ws.dir / out / "samples.txt");
    std::vector<double> fitness;
    std::string line;
    while (std::getline(in, line)) fitness.push_back(ws.values[encode_index(parse_sequence(line, 3))]);
    return fitness;
  };
  const auto none = run({"--mode", "none"}, "1", "none");
  const auto zero = run({"--mode", "deg", "--gamma", "0"}, "2", "zero");
  CHECK(ks_two_sample(none, zero).p_value > 0.01);
}

TEST_CASE("campaign command") {
  Workspace ws;
  CampaignConfig c;
  c.landscape.length = 4;
  c.landscape.target_mass = 0.01;
  c.n_labeled = 200;
  c.k = 20;
  c.filter_pool = 200;
  c.gammas = {1.0};
  c.refit_fractions = {0.1};
  c.exact_arm = false;
  c.seeds = {1, 2, 3};
  c.classifier_epochs = 50;
  c.refit_steps = 200;
  spit(ws.dir / "cfg.json", nlohmann::json{{"command", "campaign"}, {"campaign", c.to_json()}}.dump());
  const fs::path out = ws.dir / "deep" / "campaign";
  REQUIRE(cli({"--config", ws.path("cfg.json"), "--out", out.string()}).code == kExitOk);
  const std::string csv = slurp(out / "campaign.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
  for (const char* f : {"summary.json", "timing.json", "landscape.json", "resolved_config.json"}) {
    CHECK(fs::exists(out / f));
  }
  REQUIRE(cli({"--config", ws.path("cfg.json"), "--out", out.string()}).code == kExitOk);
  CHECK(slurp(out / "campaign.csv") == csv);
}
