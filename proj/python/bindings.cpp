#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "guidesampler/acceptance.hpp"
#include "guidesampler/bench.hpp"
#include "guidesampler/cli.hpp"
#include "guidesampler/errors.hpp"
#include "guidesampler/oracle.hpp"
#include "guidesampler/sampling.hpp"

namespace py = pybind11;
using namespace guidesampler;

namespace {

using Table = std::shared_ptr<TabularDistribution>;

Table table_from(int length, int s, std::vector<double> weights) {
  return std::make_shared<TabularDistribution>(length, s, std::move(weights));
}

std::vector<std::string> sample(const Table& p, std::size_t n, std::uint64_t seed, const std::string& mode,
                                double gamma, const std::optional<std::vector<double>>& values,
                                const std::string& sampler, double dt, unsigned threads) {
  const ExactDenoiser denoiser(p);
  GuidanceConfig cfg;
  cfg.mode = parse_guidance_mode(mode);
  cfg.gamma = gamma;
  if (values) {
    cfg.predictor = exact_marginal_predictor(
        CleanPredictor::tabulated(p->length(), p->alphabet_size(), *values), p);
  }
  cfg.validate(p->length(), p->alphabet_size());
  const auto schedule = InterpolationSchedule::uniform();
  std::vector<SampleResult> results;
  {
    py::gil_scoped_release release;
    results = run_chains(n, seed, threads, [&](RandomSource& rng, SamplerDiagnostics& d) {
      if (sampler == "euler") return euler_sample(denoiser, cfg, schedule, dt, rng, &d);
      if (sampler == "aoarm") return aoarm_sample(denoiser, cfg, rng, &d);
      throw ConfigError("unknown sampler '" + sampler + "'");
    });
  }
  std::vector<std::string> out;
  out.reserve(results.size());
  for (const auto& r : results) out.push_back(to_string(r.sequence));
  return out;
}

std::vector<double> empirical(int length, int s, const std::vector<std::string>& samples) {
  EmpiricalDistribution e(length, s);
  for (const auto& x : samples) e.add(parse_sequence(x, s));
  return e.probabilities();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Guided discrete flow sampling on enumerable state spaces";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<SizeError>(m, "SizeError", PyExc_ValueError);
  py::register_exception<CapabilityError>(m, "CapabilityError", PyExc_RuntimeError);

  py::class_<TabularDistribution, Table>(m, "TabularDistribution")
      .def(py::init(&table_from), py::arg("length"), py::arg("alphabet_size"), py::arg("weights"))
      .def_static("uniform", [](int length, int s) {
        return std::make_shared<TabularDistribution>(TabularDistribution::uniform(length, s));
      })
      .def_static("gibbs",
                  [](int length, int s, double single_sd, double pair_sd, std::uint64_t seed) {
                    RandomSource rng(seed);
                    return std::make_shared<TabularDistribution>(
                        gibbs_distribution(PottsEnergy::random(length, s, single_sd, pair_sd, rng)));
                  },
                  py::arg("length"), py::arg("alphabet_size"), py::arg("single_sd") = 1.0,
                  py::arg("pair_sd") = 0.5, py::arg("seed") = 0)
      .def_static("from_json", [](const std::string& text) {
        return std::make_shared<TabularDistribution>(
            TabularDistribution::from_json(nlohmann::json::parse(text)));
      })
      .def("to_json", [](const TabularDistribution& p) { return p.to_json().dump(); })
      .def_property_readonly("length", &TabularDistribution::length)
      .def_property_readonly("alphabet_size", &TabularDistribution::alphabet_size)
      .def_property_readonly("weights", [](const TabularDistribution& p) {
        return std::vector<double>(p.weights().begin(), p.weights().end());
      })
      .def("probability", [](const TabularDistribution& p, const std::string& x) {
        return p.probability(parse_sequence(x, p.alphabet_size()));
      })
      .def("__len__", [](const TabularDistribution& p) { return p.size(); });

  m.def("encode_index", [](const std::string& x, int s) { return encode_index(parse_sequence(x, s)); });
  m.def("decode_index", [](std::uint64_t i, int length, int s) { return to_string(decode_index(i, length, s)); });

  m.def("brute_force_posterior",
        [](const Table& p, std::vector<double> values, double gamma) {
          return std::make_shared<TabularDistribution>(brute_force_posterior(
              *p, CleanPredictor::tabulated(p->length(), p->alphabet_size(), std::move(values)), gamma));
        },
        py::arg("p"), py::arg("values"), py::arg("gamma") = 1.0);

  m.def("sample", &sample, py::arg("p"), py::arg("n"), py::arg("seed") = 0, py::arg("mode") = "none",
        py::arg("gamma") = 1.0, py::arg("values") = std::nullopt, py::arg("sampler") = "aoarm",
        py::arg("dt") = 0.01, py::arg("threads") = 1);

  m.def("empirical", &empirical, py::arg("length"), py::arg("alphabet_size"), py::arg("samples"));
  m.def("tv_distance", [](const std::vector<double>& a, const std::vector<double>& b) { return tv_distance(a, b); });

  m.def("check_names", [] {
    std::vector<std::string> names;
    for (const auto& c : acceptance_checks()) names.push_back(c.name);
    return names;
  });
  m.def("_run_check",
        [](const std::string& name, std::uint64_t seed, unsigned threads) {
          AcceptanceOptions options;
          options.seed = seed;
          options.threads = threads;
          CheckResult r;
          {
            py::gil_scoped_release release;
            r = run_check(name, options);
          }
          return r.to_json().dump();
        },
        py::arg("name"), py::arg("seed") = AcceptanceOptions{}.seed, py::arg("threads") = 1);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    int code = 0;
    {
      py::gil_scoped_release release;
      code = run_cli(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  });
}
