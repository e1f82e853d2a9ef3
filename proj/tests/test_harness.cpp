#include <algorithm>
#include <cmath>
#include <initializer_list>

#include <doctest.h>

#include "ballgibbs/harness.hpp"

using namespace ballgibbs;

namespace {

double record(const ExperimentReport& report, const std::string& metric, int modes = -1) {
  for (const ResultRecord& r : report.records) {
    if (r.metric == metric && (modes < 0 || r.modes == modes)) return r.value;
  }
  FAIL("missing record " << metric);
  return NAN;
}

const Gate* gate(const ExperimentReport& report, const std::string& name) {
  for (const Gate& g : report.gates) {
    if (g.name.rfind(name, 0) == 0) return &g;
  }
  return nullptr;
}

bool has_violation(const ConfigError& e, const std::string& fragment) {
  return std::any_of(e.violations().begin(), e.violations().end(),
                     [&](const std::string& v) { return v.find(fragment) != std::string::npos; });
}

ConfigError config_error(const std::string& text, std::optional<Experiment> implied = std::nullopt) {
  try {
    parse_config(text, implied);
  } catch (const ConfigError& e) {
    return e;
  }
  FAIL("configuration was accepted: " << text);
  return ConfigError({});
}

ExperimentConfig small_smoothing(double scale) {
  ExperimentConfig c = parse_config(
      "experiment = smoothing\nmodes = 4, 6, 8\nseeds = 2\nhorizon = 0.1\n"
      "gates.free_ensemble = 200\n");
  c.nonlinear_scale = scale;
  return c;
}

}  // namespace

TEST_CASE("minimal configuration fills defaults") {
  const ExperimentConfig c = parse_config("experiment = invariance\n");
  CHECK(c.experiment == Experiment::Invariance);
  CHECK(c.dimension == 3);
  CHECK(c.model == Model::NLS);
  CHECK(c.alpha == 2.0);
  CHECK(c.modes == std::vector<int>{16});
  CHECK(c.ensemble == 2000);
  CHECK(c.horizon == 1.0);
  const ExperimentConfig conv = parse_config("experiment = convergence");
  CHECK(conv.horizon == 0.5);
  CHECK(conv.reference_modes == 256);
  CHECK(conv.modes == std::vector<int>{16, 32, 64, 128});
  CHECK(conv.s == std::vector<double>{0.4});
  const ExperimentConfig smooth = parse_config("experiment = smoothing\nalpha = 2");
  CHECK(smooth.model == Model::NLW);
  CHECK(smooth.gate_s == doctest::Approx(1.2));
  CHECK(smooth.seeds == 400);
  CHECK(smooth.s.size() == 4);
  CHECK(smooth.s[0] == doctest::Approx(0.75));
}

TEST_CASE("sections, comments and explicit keys") {
  const ExperimentConfig c = parse_config(
      "# comment\nexperiment = xsb\nmodes = 8, 16  # trailing\n[flow]\ndt = 2e-4\n"
      "[norms]\nb = 0.5, 0.7\n[gates]\nstability = 0.3\n");
  CHECK(c.modes == std::vector<int>{8, 16});
  CHECK(c.dt == 2e-4);
  CHECK(c.b == std::vector<double>{0.5, 0.7});
  CHECK(c.stability == 0.3);
  CHECK(c.explicit_keys.count("flow.dt") == 1);
  CHECK(c.explicit_keys.count("horizon") == 0);
  const ExperimentConfig dotted = parse_config("experiment = xsb\nflow.dt = 2e-4\n");
  CHECK(dotted.dt == 2e-4);
  const ExperimentConfig implied = parse_config("alpha = 2\n", Experiment::Coupling);
  CHECK(implied.experiment == Experiment::Coupling);
}

TEST_CASE("wave model rejects alpha >= 4") {
  const ConfigError e = config_error("experiment = smoothing\nmodel = NLW\nalpha = 5\n");
  CHECK(has_violation(e, "alpha < 4"));
  CHECK(std::string(e.what()).find("alpha = 5") != std::string::npos);
}

TEST_CASE("every violation is reported") {
  const ConfigError e = config_error(
      "experiment = convergence\nalpha = 2\nalpha = 3\nbogus = 1\nmodes = 16, 32\n"
      "horizon = -1\n[flow]\ndt = fast\n");
  CHECK(has_violation(e, "duplicate key 'alpha'"));
  CHECK(has_violation(e, "unknown key 'bogus'"));
  CHECK(has_violation(e, "flow.dt"));
  CHECK(has_violation(e, "horizon must be positive"));
  CHECK(has_violation(e, "at least 4 values"));
  CHECK(e.violations().size() >= 5);
}

TEST_CASE("other rejected configurations") {
  CHECK(has_violation(config_error("alpha = 2\n"), "missing required key 'experiment'"));
  CHECK(has_violation(config_error("experiment = coupling\n", Experiment::Xsb), "does not match"));
  CHECK(has_violation(config_error("experiment = teleport\n"), "unknown experiment"));
  CHECK(has_violation(config_error("experiment = invariance\nensemble = 100\n"), "ensemble >= 500"));
  CHECK(has_violation(config_error("experiment = smoothing\nmodel = NLS\n"), "requires model NLW"));
  CHECK(has_violation(config_error("experiment = convergence\ndimension = 3\nalpha = 3\n"), "alpha = 2"));
  CHECK(has_violation(config_error("experiment = convergence\ndimension = 2\nalpha = 3\n"), "even integer"));
  CHECK(has_violation(config_error("experiment = coupling\ncoupling.bound_sizes = 16, 128\n"), "[1, 64]"));
  CHECK(has_violation(config_error("experiment = xsb\nhorizon = 0.1\n"), "xsb needs"));
  CHECK(has_violation(config_error("experiment = basis\nmodes = 8, 4\n"), "strictly increasing"));
  CHECK(has_violation(config_error("experiment = basis\n[flow\n"), "malformed section"));
  CHECK(has_violation(config_error("experiment = basis\njust text\n"), "expected key = value"));
  CHECK(has_violation(config_error("experiment = basis\nflow.refine = maybe\n"), "true or false"));
}

TEST_CASE("configuration hash") {
  const ExperimentConfig a = parse_config("experiment = xsb\nalpha = 2\nseeds = 4\n");
  const ExperimentConfig b = parse_config("# same content\nseeds=4\n\nalpha =  2.0\nexperiment = xsb\n");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  ExperimentConfig c = a;
  c.output = "elsewhere";
  CHECK(config_hash(a) == config_hash(c));
  c.seeds = 5;
  CHECK(config_hash(a) != config_hash(c));
  CHECK(config_hash(a) == config_hash(parse_config(canonical_text(a))));
  for (Experiment e : {Experiment::Basis, Experiment::Sample, Experiment::Evolve, Experiment::Invariance,
                       Experiment::Convergence, Experiment::Smoothing, Experiment::Coupling, Experiment::Xsb}) {
    CHECK(parse_experiment(to_string(e)) == e);
    CHECK(validate(default_config(e)).empty());
  }
}

TEST_CASE("result records") {
  const std::vector<ResultRecord> records = {{"x", "00ff", 1, 8, "m", 0.1}, {"x", "00ff", 2, 8, "m", 1e-300}};
  CHECK(results_csv(records) == "experiment,config_hash,seed,N,metric,value\n"
                                "x,00ff,1,8,m,0.10000000000000001\nx,00ff,2,8,m,1e-300\n");
  std::vector<ResultRecord> mixed = records;
  mixed.push_back({"x", "00fe", 1, 8, "m", 0.0});
  CHECK_THROWS_AS(results_csv(mixed), std::invalid_argument);
}

TEST_CASE("summary statistics") {
  CHECK(median({3, 1, 2}) == 2);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK_THROWS(median({}));
  CHECK(weighted_median({1, 2, 3}, {1, 1, 1}) == 2);
  CHECK(weighted_median({1, 2, 3}, {0.1, 0.1, 5}) == 3);
  CHECK(relative_spread({1, 1, 1}) == 0.0);
  CHECK(relative_spread({1, 2, 3}) == doctest::Approx(0.5));
}

TEST_CASE("invariance with the nonlinearity switched off") {
  ExperimentConfig c = parse_config("experiment = invariance\nmodes = 8\nensemble = 500\nhorizon = 0.2\n");
  c.nonlinear_scale = 0.0;
  const ExperimentReport r = run_invariance(c);
  for (const char* t : {"t0.1", "t0.2"}) {
    const double m0 = record(r, "gibbs.mass.t0.mean");
    CHECK(std::fabs(record(r, std::string("gibbs.mass.") + t + ".mean") - m0) <= 1e-13 * m0);
    CHECK(std::fabs(record(r, std::string("gibbs.abs_u1_sq.") + t + ".difference")) <= 1e-13);
  }
  REQUIRE(gate(r, "gibbs invariance"));
  CHECK(gate(r, "gibbs invariance")->passed);
  REQUIRE(gate(r, "free-measure negative control"));
  CHECK(record(r, "effective_sample_size") > 400);
}

TEST_CASE("invariance aborts on degenerate weights") {
  ExperimentConfig c = parse_config("experiment = invariance\nmodes = 8\nensemble = 500\n");
  c.min_ess = 1e6;
  const ExperimentReport r = run_invariance(c);
  CHECK_FALSE(r.passed());
  CHECK_FALSE(gate(r, "effective sample size")->passed);
  CHECK(gate(r, "gibbs invariance") == nullptr);
}

TEST_CASE("smoothing deviation is linear in the nonlinearity scale") {
  const ExperimentReport a = run_smoothing(small_smoothing(1e-3));
  const ExperimentReport b = run_smoothing(small_smoothing(2e-3));
  const ExperimentReport zero = run_smoothing(small_smoothing(0.0));
  for (int n : {4, 6, 8}) {
    const double da = record(a, "deviation.s0.75.median", n);
    const double db = record(b, "deviation.s0.75.median", n);
    CHECK(db / da == doctest::Approx(2.0).epsilon(0.01));
    CHECK(record(zero, "deviation.s0.75.median", n) <= 1e-12);
  }
}

TEST_CASE("small runs are deterministic and thread independent") {
  const std::vector<std::string> configs = {
      "experiment = invariance\nmodes = 6\nensemble = 500\nhorizon = 0.1\n",
      "experiment = convergence\nmodes = 4, 6, 8, 10\nreference_modes = 12\nseeds = 3\nhorizon = 0.05\n"
      "flow.dt = 1e-4\n",
      "experiment = smoothing\nmodes = 4, 8\nseeds = 2\nhorizon = 0.1\ngates.free_ensemble = 100\n",
      "experiment = coupling\ncoupling.bound_sizes = 4, 8\ncoupling.n0 = 16\n",
      "experiment = xsb\nmodes = 4, 8\nseeds = 2\nhorizon = 0.25\nflow.dt = 1e-4\n"
      "gates.free_ensemble = 100\n",
  };
  for (const std::string& text : configs) {
    CAPTURE(text);
    const ExperimentConfig c = parse_config(text);
    const ExperimentReport first = run_experiment(c, {1, false});
    const ExperimentReport second = run_experiment(c, {1, false});
    const ExperimentReport threaded = run_experiment(c, {3, false});
    CHECK(!first.records.empty());
    CHECK(results_csv(first.records) == results_csv(second.records));
    CHECK(results_csv(first.records) == results_csv(threaded.records));
    CHECK(norm_csv(first.norms) == norm_csv(threaded.norms));
    for (const ResultRecord& r : first.records) CHECK(r.config_hash == config_hash(c));
    for (const Gate& g : first.gates) CHECK(!g.name.empty());
  }
}

TEST_CASE("convergence records per-seed distances and quantiles") {
  const ExperimentConfig c = parse_config(
      "experiment = convergence\nmodes = 4, 6, 8, 10\nreference_modes = 12\nseeds = 3\n"
      "horizon = 0.05\nflow.dt = 1e-4\n");
  const ExperimentReport r = run_convergence(c);
  int distances = 0;
  for (const ResultRecord& rec : r.records) distances += rec.metric == "distance";
  CHECK(distances == 12);
  for (int n : {4, 6, 8, 10}) {
    CHECK(record(r, "distance.q25", n) <= record(r, "distance.median", n));
    CHECK(record(r, "distance.median", n) <= record(r, "distance.q75", n));
  }
  REQUIRE(gate(r, "median distance strictly decreasing"));
}

TEST_CASE("coupling run on small sizes") {
  const ExperimentReport r = run_coupling(parse_config(
      "experiment = coupling\ncoupling.bound_sizes = 4, 8\ncoupling.n0 = 16\n"));
  CHECK(gate(r, "permutation symmetry")->passed);
  CHECK(gate(r, "census partitions all quadruples")->passed);
  CHECK(record(r, "census.nonresonant") + record(r, "census.near_resonant") == 8 * 8 * 8 * 8);
  CHECK(r.artifacts.count("logfit.json") == 1);
  CHECK(r.artifacts.count("coupling.csv") == 1);
}

TEST_CASE("xsb run writes norm rows") {
  const ExperimentReport r = run_xsb(parse_config(
      "experiment = xsb\nmodes = 4, 8\nseeds = 2\nhorizon = 0.25\nflow.dt = 1e-4\n"
      "gates.free_ensemble = 100\n"));
  CHECK(r.norms.size() >= 8);
  CHECK(record(r, "xsb.spread") >= 0);
  CHECK(record(r, "mixed.spread") >= 0);
}
