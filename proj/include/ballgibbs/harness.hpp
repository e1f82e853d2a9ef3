#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ballgibbs/dynamics.hpp"
#include "ballgibbs/spacetime_norms.hpp"

namespace ballgibbs {

enum class Experiment { Basis, Sample, Evolve, Invariance, Convergence, Smoothing, Coupling, Xsb };

std::string to_string(Experiment experiment);
Experiment parse_experiment(const std::string& text);

/// Every parameter an experiment can take. Keys not given in the text get
/// experiment-specific defaults; `explicit_keys` records which were given.
struct ExperimentConfig {
  Experiment experiment = Experiment::Invariance;
  int dimension = 3;
  Model model = Model::NLS;
  double alpha = 2.0;
  std::vector<int> modes{16};
  int reference_modes = 256;
  double horizon = 1.0;
  std::uint64_t seed = 1;
  int seeds = 20;
  int ensemble = 2000;

  // [flow]
  double dt = 0.0;
  Integrator integrator = Integrator::ExponentialRK4;
  double drift_tolerance = 1e-8;
  double dt_floor = 1e-9;
  int samples_per_unit_time = 256;
  bool refine = true;
  double nonlinear_scale = 1.0;

  // [norms]
  std::vector<double> s{0.25};
  std::vector<double> b{0.7};
  double p = 3.9;
  double q = 8.0;
  double mixed_s = 0.25;
  double divergence_s = 0.75;
  double taper = 0.25;

  // [coupling]
  std::vector<int> bound_sizes{16, 32};
  int n0 = 256;
  double exponent = 0.01;

  // [gates]
  double z_threshold = 3.0;
  double stability = 0.25;
  double sigma = 3.0;
  double min_ess = 50.0;
  double gate_s = 1.2;
  double bound_band = 0.1;
  double r_squared = 0.99;
  double slope_band = 0.15;
  double refine_tolerance = 0.02;  // relative change of norms under dt / 2
  int free_ensemble = 2000;

  // [invariance]
  bool negative_control = true;

  std::string output;
  std::set<std::string> explicit_keys;
};

/// All violations found while parsing or validating, one message each.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// key = value lines; `[section]` headers qualify the keys that follow
/// (section.key may also be written directly). `#` starts a comment.
/// Unknown and duplicate keys are errors. `experiment` is required unless
/// `implied` is given, in which case a stated experiment must agree with it.
/// Throws ConfigError listing every violation.
ExperimentConfig parse_config(const std::string& text,
                              std::optional<Experiment> implied = std::nullopt);

/// Defaults for `experiment` with nothing else set.
ExperimentConfig default_config(Experiment experiment);

/// Semantic range checks; returns every violation (empty when valid).
std::vector<std::string> validate(const ExperimentConfig& config);

/// Canonical key=value text of the semantic content (output dir excluded).
std::string canonical_text(const ExperimentConfig& config);
/// 64-bit FNV-1a of canonical_text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

struct ResultRecord {
  std::string experiment;
  std::string config_hash;
  std::uint64_t seed = 0;
  int modes = 0;
  std::string metric;
  double value = 0.0;
};

struct Gate {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentReport {
  std::string experiment;
  std::string config_hash;
  std::vector<ResultRecord> records;
  std::vector<NormRow> norms;
  std::vector<Gate> gates;
  nlohmann::json summary = nlohmann::json::object();
  /// Extra output files by name (e.g. the coupling table).
  std::map<std::string, std::string> artifacts;
  /// Filled only when trajectories are requested.
  std::vector<Trajectory> trajectories;

  bool passed() const;
};

struct RunOptions {
  int threads = 1;
  bool keep_trajectories = false;
};

ExperimentReport run_invariance(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentReport run_convergence(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentReport run_smoothing(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentReport run_coupling(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentReport run_xsb(const ExperimentConfig& config, const RunOptions& options = {});
/// Dispatches on config.experiment (experiments only, not basis/sample/evolve).
ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// CSV experiment,config_hash,seed,N,metric,value. Throws std::invalid_argument
/// when records carry different config hashes.
std::string results_csv(const std::vector<ResultRecord>& records);

/// Median of a non-empty sample, and the weighted median (weights >= 0).
double median(std::vector<double> values);
double weighted_median(const std::vector<double>& values, const std::vector<double>& weights);
/// max_i |v_i / mean(v) - 1|
double relative_spread(const std::vector<double>& values);

std::string version();

}  // namespace ballgibbs
