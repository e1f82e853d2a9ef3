// Command-line front end: one subcommand per experiment plus basis / sample /
// evolve utilities. Writes results.csv and meta.json into --out.
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "ballgibbs/errors.hpp"
#include "ballgibbs/harness.hpp"
#include "ballgibbs/measures.hpp"

namespace fs = std::filesystem;
using namespace ballgibbs;

namespace {

constexpr int kExitGateFailed = 2;
constexpr int kExitError = 1;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 1;
  bool dump_trajectories = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_bytes(const fs::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buffer;
}

ExperimentConfig load_config(Experiment experiment, const Options& options) {
  ExperimentConfig config = options.config_path.empty()
                                ? default_config(experiment)
                                : parse_config(read_file(options.config_path), experiment);
  if (options.seed) config.seed = *options.seed;
  if (const auto problems = validate(config); !problems.empty()) throw ConfigError(problems);
  return config;
}

nlohmann::json config_json(const ExperimentConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  std::istringstream in(canonical_text(config));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    j[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return j;
}

std::string trajectory_name(const Trajectory& t, std::size_t index) {
  return "traj_" + std::to_string(index) + "_N" + std::to_string(t.modes()) + "_seed" +
         std::to_string(t.seed) + ".bin";
}

// Basis / sample / evolve produce a report in the same shape as experiments.
ExperimentReport run_basis(const ExperimentConfig& c) {
  ExperimentReport report;
  report.experiment = to_string(c.experiment);
  report.config_hash = config_hash(c);
  auto add = [&](int n, const std::string& metric, double value) {
    report.records.push_back({report.experiment, report.config_hash, c.seed, n, metric, value});
  };
  nlohmann::json summaries = nlohmann::json::array();
  bool ok = true;
  for (int n : c.modes) {
    const EigenBasis basis = make_basis(c.dimension, n, std::max(4.0, c.alpha));
    add(n, "nodes", basis.nodes());
    add(n, "orthonormality_residual", basis.orthonormality_residual());
    add(n, "eigenvalue_residual", basis.eigenvalue_residual());
    add(n, "boundary_residual", basis.boundary_residual());
    for (int k = 1; k <= n; ++k) add(n, "z" + std::to_string(k), basis.frequency(k));
    ok = ok && basis.orthonormality_residual() <= kOrthonormalityTolerance &&
         basis.eigenvalue_residual() <= 1e-8;
    summaries.push_back(basis.summary());
  }
  report.summary["bases"] = summaries;
  report.gates.push_back({"basis residuals", ok, "orthonormality <= 1e-10, eigenvalue <= 1e-8"});
  return report;
}

ExperimentReport run_sample(const ExperimentConfig& c, int threads) {
  ExperimentReport report;
  report.experiment = to_string(c.experiment);
  report.config_hash = config_hash(c);
  const int n = c.modes.front();
  auto basis = std::make_shared<const EigenBasis>(make_basis(c.dimension, n, std::max(4.0, c.alpha)));
  const Ensemble ensemble = draw_ensemble(basis, c.model, c.alpha, c.ensemble, c.seed, threads);
  std::vector<double> weights;
  for (const auto& s : ensemble.samples) {
    weights.push_back(s.weight);
    report.records.push_back({report.experiment, report.config_hash, s.seed, n, "weight", s.weight});
    report.records.push_back({report.experiment, report.config_hash, s.seed, n, "mass", mass(s.coeffs)});
  }
  const double ess = weighted_expectation(weights, weights).effective_sample_size;
  report.records.push_back({report.experiment, report.config_hash, c.seed, n, "effective_sample_size", ess});
  report.gates.push_back({"effective sample size", ess >= std::min<double>(c.min_ess, c.ensemble),
                          "ESS " + std::to_string(ess)});
  report.artifacts["ensemble.jsonl"] = ensemble_to_jsonl(ensemble);
  return report;
}

ExperimentReport run_evolve(const ExperimentConfig& c, int threads) {
  ExperimentReport report;
  report.experiment = to_string(c.experiment);
  report.config_hash = config_hash(c);
  const int n = c.modes.front();
  auto basis = std::make_shared<const EigenBasis>(make_basis(c.dimension, n, std::max(4.0, c.alpha)));
  std::vector<SpectralState> states;
  for (int i = 0; i < c.seeds; ++i) {
    states.push_back({sample_free(*basis, sample_seed(c.seed, i)), c.model, 0.0});
  }
  FlowConfig flow;
  flow.model = c.model;
  flow.alpha = c.alpha;
  flow.dt = c.dt;
  flow.integrator = c.integrator;
  flow.tolerance = c.drift_tolerance;
  flow.dt_floor = c.dt_floor;
  flow.nonlinear_scale = c.nonlinear_scale;
  const int intervals = std::max(1, static_cast<int>(std::lround(c.horizon * c.samples_per_unit_time)));
  auto trajectories = evolve_batch(basis, states, flow, c.horizon,
                                   uniform_times(0.0, c.horizon, intervals), threads);
  bool ok = true;
  for (int i = 0; i < c.seeds; ++i) {
    Trajectory& t = trajectories[i];
    t.seed = sample_seed(c.seed, i);
    auto add = [&](const std::string& metric, double value) {
      report.records.push_back({report.experiment, report.config_hash, t.seed, n, metric, value});
    };
    ok = ok && t.failure.empty();
    add("dt_used", t.dt_used);
    add("hamiltonian_drift", t.drift);
    add("mass_drift", std::fabs(t.mass.back() - t.mass.front()) / t.mass.front());
    report.artifacts["traj_" + std::to_string(t.seed) + ".jsonl"] = trajectory_to_jsonl(t);
  }
  report.gates.push_back({"hamiltonian drift", ok, "tolerance " + std::to_string(c.drift_tolerance)});
  report.trajectories = std::move(trajectories);
  return report;
}

int run(Experiment experiment, const Options& options) {
  const auto started = std::chrono::steady_clock::now();
  const std::string started_at = utc_now();
  const ExperimentConfig config = load_config(experiment, options);
  const fs::path out = options.out.empty()
                           ? fs::path(config.output.empty() ? "out/" + to_string(experiment) : config.output)
                           : fs::path(options.out);
  fs::create_directories(out);

  RunOptions run_options;
  run_options.threads = std::max(1, options.threads);
  run_options.keep_trajectories = options.dump_trajectories;
  ExperimentReport report;
  switch (experiment) {
    case Experiment::Basis: report = run_basis(config); break;
    case Experiment::Sample: report = run_sample(config, run_options.threads); break;
    case Experiment::Evolve: report = run_evolve(config, run_options.threads); break;
    default: report = run_experiment(config, run_options); break;
  }

  write_file(out / "results.csv", results_csv(report.records));
  if (!report.norms.empty()) write_file(out / "norms.csv", norm_csv(report.norms));
  for (const auto& [name, text] : report.artifacts) write_file(out / name, text);
  if (options.dump_trajectories) {
    for (std::size_t i = 0; i < report.trajectories.size(); ++i) {
      write_bytes(out / trajectory_name(report.trajectories[i], i),
                  trajectory_to_binary(report.trajectories[i]));
    }
  }

  nlohmann::json gates = nlohmann::json::array();
  for (const Gate& g : report.gates) {
    gates.push_back({{"name", g.name}, {"passed", g.passed}, {"detail", g.detail}});
    std::cout << (g.passed ? "PASS  " : "FAIL  ") << g.name << ": " << g.detail << '\n';
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  const nlohmann::json meta = {
      {"experiment", report.experiment},
      {"config_hash", report.config_hash},
      {"config", config_json(config)},
      {"version", version()},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                    std::to_string(EIGEN_MINOR_VERSION)},
      {"compiler", __VERSION__},
      {"threads", run_options.threads},
      {"started_at", started_at},
      {"finished_at", utc_now()},
      {"wall_seconds", wall},
      {"gates", gates},
      {"passed", report.passed()},
      {"summary", report.summary},
  };
  write_file(out / "meta.json", meta.dump(2) + "\n");
  std::cout << (report.passed() ? "all gates passed" : "gate failure") << " (" << out.string()
            << ")\n";
  return report.passed() ? 0 : kExitGateFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral Galerkin experiments for radial NLS / NLW on the unit ball"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version());

  Options options;
  const std::vector<std::pair<Experiment, std::string>> commands = {
      {Experiment::Basis, "Build eigenbases and report quadrature residuals"},
      {Experiment::Sample, "Draw a Gibbs-weighted ensemble (ensemble.jsonl)"},
      {Experiment::Evolve, "Evolve free draws and report conservation"},
      {Experiment::Invariance, "Gibbs invariance with free-measure negative control"},
      {Experiment::Convergence, "Shared-sample convergence of u^N to the reference"},
      {Experiment::Smoothing, "Deviation from the linear flow across N"},
      {Experiment::Coupling, "Quartic overlap bound, resonance census, diagonal log fit"},
      {Experiment::Xsb, "X^{s,b} proxy and mixed norms across N"},
  };
  std::optional<Experiment> chosen;
  for (const auto& [experiment, help] : commands) {
    CLI::App* sub = app.add_subcommand(to_string(experiment), help);
    sub->add_option("--config", options.config_path, "Configuration file (key = value)")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", options.seed, "Base seed (overrides the configuration)");
    sub->add_option("--out", options.out, "Output directory");
    sub->add_option("--threads", options.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--dump-traj", options.dump_trajectories, "Write binary trajectory dumps");
    sub->callback([&chosen, e = experiment] { chosen = e; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }
  try {
    return run(*chosen, options);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return kExitError;
}
