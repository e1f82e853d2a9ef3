#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "ballgibbs/coupling.hpp"
#include "ballgibbs/harness.hpp"
#include "ballgibbs/measures.hpp"

#ifndef BALLGIBBS_VERSION
#define BALLGIBBS_VERSION "0.0.0"
#endif

namespace ballgibbs {
namespace {

std::string fmt(double x) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", x);
  return buffer;
}

std::string short_fmt(double x) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%g", x);
  return buffer;
}

class Recorder {
 public:
  Recorder(ExperimentReport& report, const ExperimentConfig& config) : report_(report) {
    report_.experiment = to_string(config.experiment);
    report_.config_hash = config_hash(config);
  }

  void add(std::uint64_t seed, int modes, const std::string& metric, double value) {
    report_.records.push_back({report_.experiment, report_.config_hash, seed, modes, metric, value});
  }

  void gate(const std::string& name, bool passed, const std::string& detail) {
    report_.gates.push_back({name, passed, detail});
  }

 private:
  ExperimentReport& report_;
};

std::shared_ptr<const EigenBasis> shared_basis(int dimension, int modes, double alpha) {
  return std::make_shared<const EigenBasis>(make_basis(dimension, modes, std::max(4.0, alpha)));
}

FlowConfig flow_config(const ExperimentConfig& c) {
  FlowConfig f;
  f.model = c.model;
  f.alpha = c.alpha;
  f.dt = c.dt;
  f.integrator = c.integrator;
  f.tolerance = c.drift_tolerance;
  f.dt_floor = c.dt_floor;
  f.nonlinear_scale = c.nonlinear_scale;
  return f;
}

int sample_intervals(const ExperimentConfig& c) {
  return std::max(1, static_cast<int>(std::lround(c.horizon * c.samples_per_unit_time)));
}

std::vector<SpectralState> heads(const std::vector<Coeffs>& full, int modes, Model model) {
  std::vector<SpectralState> states;
  states.reserve(full.size());
  for (const Coeffs& c : full) states.push_back({c.head(modes), model, 0.0});
  return states;
}

// Seeds for a free-field comparison ensemble, disjoint from the per-seed draws.
std::uint64_t comparator_base(std::uint64_t seed) {
  std::uint64_t state = seed ^ 0x6a09e667f3bcc909ULL;
  return splitmix64(state);
}

struct MeanSe {
  double mean = 0;
  double se = 0;
};

MeanSe mean_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1) / n)};
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] < v[i - 1])) return false;
  }
  return true;
}

std::string list_text(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + short_fmt(v[i]);
  return out;
}

// Free-field check: mean of ||P_N phi||_{H^s}^2 (after the linear flow to T)
// against the closed-form partial sum, one z-score per N.
struct DivergenceCheck {
  std::vector<double> means, partials, z;
  bool passed = true;
  bool growing = true;
};

DivergenceCheck free_divergence(const ExperimentConfig& c, const std::vector<int>& modes,
                                const std::vector<std::shared_ptr<const EigenBasis>>& bases,
                                double s, Recorder& rec, const std::string& prefix) {
  DivergenceCheck out;
  const std::uint64_t base = comparator_base(c.seed);
  const auto& largest = *bases.back();
  std::vector<Coeffs> draws;
  draws.reserve(c.free_ensemble);
  for (int j = 0; j < c.free_ensemble; ++j) {
    draws.push_back(sample_free(largest.frequencies(), sample_seed(base, j)));
  }
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const EigenBasis& basis = *bases[k];
    std::vector<double> values;
    values.reserve(draws.size());
    for (const Coeffs& d : draws) {
      const Coeffs evolved = linear_flow(basis, d.head(modes[k]), c.horizon, c.model);
      const double norm = sobolev_norm(basis, evolved, s);
      values.push_back(norm * norm);
    }
    const MeanSe m = mean_se(values);
    const double partial = free_sobolev_mean(basis.frequencies(), modes[k], s);
    const double z = (m.mean - partial) / m.se;
    out.means.push_back(m.mean);
    out.partials.push_back(partial);
    out.z.push_back(z);
    out.passed = out.passed && std::fabs(z) <= c.sigma;
    if (k > 0 && !(m.mean > out.means[k - 1])) out.growing = false;
    rec.add(c.seed, modes[k], prefix + ".mean", m.mean);
    rec.add(c.seed, modes[k], prefix + ".se", m.se);
    rec.add(c.seed, modes[k], prefix + ".partial_sum", partial);
    rec.add(c.seed, modes[k], prefix + ".z", z);
  }
  return out;
}

}  // namespace

bool ExperimentReport::passed() const {
  return std::all_of(gates.begin(), gates.end(), [](const Gate& g) { return g.passed; });
}

std::string version() { return BALLGIBBS_VERSION; }

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double weighted_median(const std::vector<double>& values, const std::vector<double>& weights) {
  if (values.empty() || values.size() != weights.size()) {
    throw std::invalid_argument("weighted_median: need equal, non-empty inputs");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0)) throw std::invalid_argument("weighted_median: weights sum to zero");
  double acc = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    acc += weights[order[i]];
    if (acc >= 0.5 * total) {
      // Exactly half: average with the next value, as the unweighted median does.
      if (acc == 0.5 * total && i + 1 < order.size()) {
        return 0.5 * (values[order[i]] + values[order[i + 1]]);
      }
      return values[order[i]];
    }
  }
  return values[order.back()];
}

double relative_spread(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double worst = 0;
  for (double v : values) worst = std::max(worst, std::fabs(v / mean - 1.0));
  return worst;
}

std::string results_csv(const std::vector<ResultRecord>& records) {
  std::ostringstream out;
  out << "experiment,config_hash,seed,N,metric,value\n";
  for (const ResultRecord& r : records) {
    if (r.config_hash != records.front().config_hash) {
      throw std::invalid_argument("results_csv: records from different configurations");
    }
    out << r.experiment << ',' << r.config_hash << ',' << r.seed << ',' << r.modes << ','
        << r.metric << ',' << fmt(r.value) << '\n';
  }
  return out.str();
}

ExperimentReport run_invariance(const ExperimentConfig& c, const RunOptions& options) {
  ExperimentReport report;
  Recorder rec(report, c);
  const int n = c.modes.front();
  const auto basis = shared_basis(c.dimension, n, c.alpha);
  const Ensemble ensemble = draw_ensemble(basis, c.model, c.alpha, c.ensemble, c.seed, options.threads);

  std::vector<double> gibbs(ensemble.samples.size()), free(ensemble.samples.size(), 1.0);
  for (std::size_t i = 0; i < gibbs.size(); ++i) gibbs[i] = ensemble.samples[i].weight;
  const double ess = weighted_expectation(gibbs, gibbs).effective_sample_size;
  rec.add(c.seed, n, "effective_sample_size", ess);
  report.summary["effective_sample_size"] = ess;
  if (ess < c.min_ess) {
    rec.gate("effective sample size", false,
             "ESS " + short_fmt(ess) + " < " + short_fmt(c.min_ess) + ": weights degenerate, run aborted");
    return report;
  }
  rec.gate("effective sample size", true, "ESS " + short_fmt(ess));

  std::vector<SpectralState> states;
  for (const auto& s : ensemble.samples) states.push_back({s.coeffs, c.model, 0.0});
  const std::vector<double> times = uniform_times(0.0, c.horizon, 2);
  const auto trajectories =
      evolve_batch(basis, states, flow_config(c), c.horizon, times, options.threads);
  double drift = 0;
  for (const auto& t : trajectories) {
    if (!t.failure.empty()) {
      rec.gate("integrator", false, "seed " + std::to_string(t.seed) + ": " + t.failure);
      return report;
    }
    drift = std::max(drift, t.drift);
  }
  rec.add(c.seed, n, "max_drift", drift);
  report.summary["max_drift"] = drift;

  struct Observable {
    std::string name;
    bool gated;
    std::function<double(const Coeffs&)> f;
  };
  const double s = c.s.front();
  const std::vector<Observable> observables = {
      {"mass", true, [](const Coeffs& u) { return mass(u); }},
      {"re_u1", true, [](const Coeffs& u) { return u[0].real(); }},
      {"potential", true,
       [&](const Coeffs& u) { return potential_energy(*basis, u, c.alpha, c.model); }},
      {"abs_u1_sq", false, [](const Coeffs& u) { return std::norm(u[0]); }},
      {"sobolev_" + short_fmt(s), false, [&](const Coeffs& u) { return sobolev_norm(*basis, u, s); }},
  };

  double worst_gibbs = 0, worst_control = 0;
  std::string worst_name;
  nlohmann::json table = nlohmann::json::array();
  for (const Observable& obs : observables) {
    std::vector<std::vector<double>> values(times.size(), std::vector<double>(trajectories.size()));
    for (std::size_t k = 0; k < times.size(); ++k) {
      for (std::size_t i = 0; i < trajectories.size(); ++i) {
        values[k][i] = obs.f(trajectories[i].states[k]);
      }
    }
    for (int control = 0; control < (c.negative_control ? 2 : 1); ++control) {
      const std::vector<double>& w = control ? free : gibbs;
      const std::string tag = std::string(control ? "free." : "gibbs.") + obs.name;
      const Estimate e0 = weighted_expectation(w, values[0]);
      rec.add(c.seed, n, tag + ".t0.mean", e0.mean);
      rec.add(c.seed, n, tag + ".t0.se", e0.standard_error);
      for (std::size_t k = 1; k < times.size(); ++k) {
        const Estimate et = weighted_expectation(w, values[k]);
        // Both means come from the same samples, so the difference is
        // estimated pairwise. The integrator's relative tolerance enters as a
        // systematic error so that conserved observables are not judged on
        // round-off.
        std::vector<double> diff(values[k].size());
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = values[k][i] - values[0][i];
        const Estimate ed = weighted_expectation(w, diff);
        const double budget = c.drift_tolerance * std::fabs(e0.mean);
        const double spread = std::hypot(ed.standard_error, budget);
        const double z = spread > 0 ? ed.mean / spread : 0.0;
        const double unpaired_spread = std::hypot(e0.standard_error, et.standard_error);
        const double unpaired = unpaired_spread > 0 ? (et.mean - e0.mean) / unpaired_spread : 0.0;
        const std::string at = tag + ".t" + short_fmt(times[k]);
        rec.add(c.seed, n, at + ".mean", et.mean);
        rec.add(c.seed, n, at + ".se", et.standard_error);
        rec.add(c.seed, n, at + ".difference", ed.mean);
        rec.add(c.seed, n, at + ".difference_se", ed.standard_error);
        rec.add(c.seed, n, at + ".z", z);
        rec.add(c.seed, n, at + ".z_unpaired", unpaired);
        table.push_back({{"observable", obs.name}, {"weights", control ? "free" : "gibbs"},
                         {"t", times[k]}, {"z", z}});
        if (!obs.gated) continue;
        if (!control && std::fabs(z) > worst_gibbs) {
          worst_gibbs = std::fabs(z);
          worst_name = obs.name + " at t=" + short_fmt(times[k]);
        }
        if (control && obs.name == "potential") worst_control = std::max(worst_control, std::fabs(z));
      }
    }
  }
  report.summary["z_scores"] = table;
  rec.gate("gibbs invariance", worst_gibbs <= c.z_threshold,
           "max |z| " + short_fmt(worst_gibbs) + " (" + worst_name + "), threshold " +
               short_fmt(c.z_threshold));
  if (c.negative_control) {
    rec.gate("free-measure negative control", worst_control > c.z_threshold,
             "potential |z| " + short_fmt(worst_control) + " must exceed " + short_fmt(c.z_threshold));
  }
  if (options.keep_trajectories) report.trajectories = trajectories;
  return report;
}

ExperimentReport run_convergence(const ExperimentConfig& c, const RunOptions& options) {
  ExperimentReport report;
  Recorder rec(report, c);
  const double s = c.s.front();
  std::vector<int> all_modes = c.modes;
  all_modes.push_back(c.reference_modes);
  std::vector<std::shared_ptr<const EigenBasis>> bases;
  for (int m : all_modes) bases.push_back(shared_basis(c.dimension, m, c.alpha));
  const auto& reference = *bases.back();

  std::vector<std::uint64_t> seeds(c.seeds);
  std::vector<Coeffs> draws;
  for (int i = 0; i < c.seeds; ++i) {
    seeds[i] = sample_seed(c.seed, i);
    draws.push_back(sample_free(reference, seeds[i]));
  }
  const std::vector<double> times = uniform_times(0.0, c.horizon, sample_intervals(c));

  auto run_all = [&](const FlowConfig& flow, const std::vector<int>& members) {
    std::vector<Coeffs> chosen;
    for (int i : members) chosen.push_back(draws[i]);
    std::vector<std::vector<Trajectory>> out;
    for (std::size_t k = 0; k < all_modes.size(); ++k) {
      out.push_back(evolve_batch(bases[k], heads(chosen, all_modes[k], c.model), flow, c.horizon,
                                 times, options.threads));
      for (std::size_t j = 0; j < members.size(); ++j) out.back()[j].seed = seeds[members[j]];
    }
    return out;
  };

  std::vector<int> everyone(c.seeds);
  std::iota(everyone.begin(), everyone.end(), 0);
  const FlowConfig flow = flow_config(c);
  const auto runs = run_all(flow, everyone);

  std::vector<int> valid;
  for (int i = 0; i < c.seeds; ++i) {
    bool ok = true;
    for (std::size_t k = 0; k < all_modes.size(); ++k) {
      const Trajectory& t = runs[k][i];
      if (!t.failure.empty()) {
        ok = false;
        rec.add(seeds[i], all_modes[k], "integrator_failure", 1.0);
      } else {
        rec.add(seeds[i], all_modes[k], "drift", t.drift);
        rec.add(seeds[i], all_modes[k], "dt_used", t.dt_used);
      }
    }
    if (ok) valid.push_back(i);
  }
  rec.add(c.seed, 0, "failed_seeds", static_cast<double>(c.seeds - valid.size()));
  if (valid.empty()) {
    rec.gate("convergence", false, "every seed failed the integrator tolerance");
    return report;
  }

  std::vector<double> medians;
  nlohmann::json per_n = nlohmann::json::array();
  for (std::size_t k = 0; k < c.modes.size(); ++k) {
    std::vector<double> d;
    for (int i : valid) {
      d.push_back(trajectory_distance(runs[k][i], runs.back()[i], s));
      rec.add(seeds[i], c.modes[k], "distance", d.back());
    }
    std::vector<double> sorted = d;
    std::sort(sorted.begin(), sorted.end());
    const double med = median(d);
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / d.size();
    auto quantile = [&](double p) { return sorted[static_cast<std::size_t>(p * (sorted.size() - 1))]; };
    rec.add(c.seed, c.modes[k], "distance.median", med);
    rec.add(c.seed, c.modes[k], "distance.mean", mean);
    rec.add(c.seed, c.modes[k], "distance.q25", quantile(0.25));
    rec.add(c.seed, c.modes[k], "distance.q75", quantile(0.75));
    medians.push_back(med);
    per_n.push_back({{"N", c.modes[k]}, {"median", med}, {"mean", mean}});
  }
  report.summary["distance"] = per_n;
  rec.gate("median distance strictly decreasing", strictly_decreasing(medians),
           "medians " + list_text(medians));

  if (c.refine) {
    // Re-run the first seeds at half the step: the change in D must be small
    // against the gaps that the monotonicity gate relies on.
    std::vector<int> subset(valid.begin(), valid.begin() + std::min<std::size_t>(2, valid.size()));
    FlowConfig half = flow;
    half.dt = 0.5 * runs.back()[subset.front()].dt_used;
    const auto fine = run_all(half, subset);
    double change = 0;
    for (std::size_t k = 0; k < c.modes.size(); ++k) {
      for (std::size_t j = 0; j < subset.size(); ++j) {
        const int i = subset[j];
        if (!fine[k][j].failure.empty() || !fine.back()[j].failure.empty()) continue;
        const double coarse = trajectory_distance(runs[k][i], runs.back()[i], s);
        const double refined = trajectory_distance(fine[k][j], fine.back()[j], s);
        change = std::max(change, std::fabs(refined - coarse));
      }
    }
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < medians.size(); ++k) gap = std::min(gap, medians[k - 1] - medians[k]);
    rec.add(c.seed, 0, "refine.max_change", change);
    rec.add(c.seed, 0, "refine.min_gap", gap);
    rec.gate("dt refinement", change < 0.5 * gap,
             "max |D(dt/2) - D(dt)| " + short_fmt(change) + " vs half the smallest gap " +
                 short_fmt(0.5 * gap));
  }
  if (options.keep_trajectories) {
    for (const auto& per_mode : runs) {
      report.trajectories.insert(report.trajectories.end(), per_mode.begin(), per_mode.end());
    }
  }
  return report;
}

ExperimentReport run_smoothing(const ExperimentConfig& c, const RunOptions& options) {
  ExperimentReport report;
  Recorder rec(report, c);
  std::vector<std::shared_ptr<const EigenBasis>> bases;
  for (int m : c.modes) bases.push_back(shared_basis(c.dimension, m, c.alpha));
  const auto& largest = *bases.back();

  std::vector<double> grid = c.s;
  if (std::none_of(grid.begin(), grid.end(), [&](double s) { return s == c.gate_s; })) {
    grid.push_back(c.gate_s);
  }
  std::vector<std::uint64_t> seeds(c.seeds);
  std::vector<Coeffs> draws;
  for (int i = 0; i < c.seeds; ++i) {
    seeds[i] = sample_seed(c.seed, i);
    draws.push_back(sample_free(largest, seeds[i]));
  }
  const std::vector<double> times = uniform_times(0.0, c.horizon, sample_intervals(c));
  const double threshold = (5.0 - c.alpha) / 2.0;
  report.summary["threshold"] = threshold;

  // deviations[s][N] over valid seeds
  std::vector<std::vector<std::vector<double>>> deviations(
      grid.size(), std::vector<std::vector<double>>(c.modes.size()));
  for (std::size_t k = 0; k < c.modes.size(); ++k) {
    auto trajectories = evolve_batch(bases[k], heads(draws, c.modes[k], c.model), flow_config(c),
                                     c.horizon, times, options.threads);
    for (int i = 0; i < c.seeds; ++i) {
      const Trajectory& t = trajectories[i];
      if (!t.failure.empty()) {
        rec.add(seeds[i], c.modes[k], "integrator_failure", 1.0);
        rec.gate("integrator", false, "seed " + std::to_string(seeds[i]) + ": " + t.failure);
        return report;
      }
      rec.add(seeds[i], c.modes[k], "drift", t.drift);
      const SpectralState phi{draws[i], c.model, 0.0};
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const double dev = linear_deviation(*bases[k], t, phi, grid[g]);
        deviations[g][k].push_back(dev);
        rec.add(seeds[i], c.modes[k], "deviation.s" + short_fmt(grid[g]), dev);
      }
    }
    if (options.keep_trajectories) {
      report.trajectories.insert(report.trajectories.end(), trajectories.begin(), trajectories.end());
    }
  }

  nlohmann::json spreads = nlohmann::json::object();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<double> medians;
    for (std::size_t k = 0; k < c.modes.size(); ++k) {
      medians.push_back(median(deviations[g][k]));
      rec.add(c.seed, c.modes[k], "deviation.s" + short_fmt(grid[g]) + ".median", medians.back());
    }
    const double spread = relative_spread(medians);
    rec.add(c.seed, 0, "deviation.s" + short_fmt(grid[g]) + ".spread", spread);
    spreads[short_fmt(grid[g])] = {{"medians", medians}, {"spread", spread},
                                   {"fraction_of_threshold", grid[g] / threshold}};
    if (grid[g] == c.gate_s) {
      rec.gate("deviation N-stable at s=" + short_fmt(c.gate_s), spread <= c.stability,
               "medians " + list_text(medians) + ", spread " + short_fmt(spread) + " <= " +
                   short_fmt(c.stability));
    }
  }
  report.summary["deviation"] = spreads;

  const DivergenceCheck free =
      free_divergence(c, c.modes, bases, c.gate_s, rec, "free_field.s" + short_fmt(c.gate_s));
  rec.gate("free-field norm matches partial sum", free.passed,
           "z " + list_text(free.z) + " within " + short_fmt(c.sigma) + " sigma");
  rec.gate("free-field norm grows with N", free.growing, "means " + list_text(free.means));
  return report;
}

ExperimentReport run_coupling(const ExperimentConfig& c, const RunOptions&) {
  ExperimentReport report;
  Recorder rec(report, c);

  std::vector<double> constants;
  std::unique_ptr<CouplingTensor> largest;
  bool finite = true;
  for (int size : c.bound_sizes) {
    auto tensor = std::make_unique<CouplingTensor>(c.dimension, size);
    const CouplingBoundReport bound = verify_coupling_bound(*tensor, size);
    constants.push_back(bound.max_ratio);
    finite = finite && bound.all_finite && std::isfinite(bound.max_ratio);
    rec.add(c.seed, size, "bound.constant", bound.max_ratio);
    rec.add(c.seed, size, "bound.quadruples", static_cast<double>(bound.quadruples));
    rec.add(c.seed, size, "tensor.doubling_error", tensor->doubling_error());
    if (!largest || size > largest->max_index()) largest = std::move(tensor);
  }
  const double ratio = constants.back() / constants.front();
  rec.add(c.seed, 0, "bound.ratio", ratio);
  rec.gate("coupling constant finite", finite, "C " + list_text(constants));
  rec.gate("coupling constant stable", std::fabs(ratio - 1.0) <= c.bound_band,
           "C(" + std::to_string(c.bound_sizes.back()) + ")/C(" +
               std::to_string(c.bound_sizes.front()) + ") = " + short_fmt(ratio));

  // Permutation symmetry against direct quadrature on random quadruples.
  const int maxn = largest->max_index();
  const EigenBasis basis = make_basis(c.dimension, maxn);
  std::mt19937_64 rng(c.seed);
  std::uniform_int_distribution<int> pick(1, maxn);
  double asymmetry = 0;
  for (int trial = 0; trial < 48; ++trial) {
    Quadruple q{pick(rng), pick(rng), pick(rng), pick(rng)};
    std::sort(q.begin(), q.end());
    const double stored = (*largest)(q[0], q[1], q[2], q[3]);
    do {
      asymmetry = std::max(asymmetry, std::fabs(quartic_coupling(basis, q[0], q[1], q[2], q[3]) - stored));
    } while (std::next_permutation(q.begin(), q.end()));
  }
  rec.add(c.seed, maxn, "symmetry.max_error", asymmetry);
  rec.gate("permutation symmetry", asymmetry <= kCouplingTolerance,
           "max deviation " + short_fmt(asymmetry));

  const ResonanceCensus census = resonance_census(*largest, maxn, c.exponent);
  std::uint64_t cell_total = 0;
  for (const auto& [blocks, cell] : census.blocks) {
    const std::string key = "census." + std::to_string(blocks[0]) + "-" + std::to_string(blocks[1]) +
                            "-" + std::to_string(blocks[2]) + "-" + std::to_string(blocks[3]);
    for (int label = 0; label < 2; ++label) {
      const std::string name = to_string(static_cast<ResonanceLabel>(label));
      rec.add(c.seed, maxn, key + "." + name + ".count", static_cast<double>(cell.count[label]));
      rec.add(c.seed, maxn, key + "." + name + ".l2_mass", cell.l2_mass[label]);
      cell_total += cell.count[label];
    }
  }
  const std::uint64_t expected = static_cast<std::uint64_t>(maxn) * maxn * maxn * maxn;
  rec.add(c.seed, maxn, "census.nonresonant", static_cast<double>(census.total[0]));
  rec.add(c.seed, maxn, "census.near_resonant", static_cast<double>(census.total[1]));
  const bool partition = census.total[0] + census.total[1] == expected && cell_total == expected &&
                         census.quadruples == expected;
  rec.gate("census partitions all quadruples", partition,
           std::to_string(census.total[0]) + " + " + std::to_string(census.total[1]) + " of " +
               std::to_string(expected));

  const EigenBasis diag_basis = make_basis(c.dimension, c.n0);
  const DiagonalReport diag = resonant_diagonal_sum(diag_basis, c.n0);
  for (std::size_t n = 0; n < diag.sums.size(); ++n) {
    rec.add(c.seed, c.n0, "diagonal.S" + std::to_string(n + 1), diag.sums[n]);
  }
  rec.add(c.seed, c.n0, "logfit.a", diag.fit.intercept);
  rec.add(c.seed, c.n0, "logfit.c", diag.fit.slope);
  rec.add(c.seed, c.n0, "logfit.r_squared", diag.fit.r_squared);
  rec.gate("log fit R^2", diag.fit.r_squared >= c.r_squared,
           "R^2 " + short_fmt(diag.fit.r_squared) + " over [" + std::to_string(diag.fit.first) + ", " +
               std::to_string(diag.fit.last) + "]");
  double worst = 0;
  std::vector<double> increments;
  for (int n = 8; 4 * n <= c.n0 && n <= 32; n *= 2) {
    const double inc = diag.sums[2 * n - 1] - diag.sums[n - 1];
    const double rel = inc / (diag.fit.slope * std::log(2.0)) - 1.0;
    increments.push_back(rel);
    worst = std::max(worst, std::fabs(rel));
    rec.add(c.seed, n, "diagonal.doubling_increment", inc);
  }
  rec.gate("doubling increments match c log 2", !increments.empty() && worst <= c.slope_band,
           "relative deviations " + list_text(increments));

  report.summary["logfit"] = to_json(diag.fit);
  report.summary["bound_constants"] = constants;
  report.artifacts["logfit.json"] = to_json(diag.fit).dump(2) + "\n";
  const CouplingTensor small(c.dimension, c.bound_sizes.front());
  report.artifacts["coupling.csv"] = coupling_csv(small, small.max_index(), c.exponent);
  return report;
}

ExperimentReport run_xsb(const ExperimentConfig& c, const RunOptions& options) {
  ExperimentReport report;
  Recorder rec(report, c);
  std::vector<std::shared_ptr<const EigenBasis>> bases;
  for (int m : c.modes) bases.push_back(shared_basis(c.dimension, m, c.alpha));
  const auto& largest = *bases.back();
  std::vector<std::uint64_t> seeds(c.seeds);
  std::vector<Coeffs> draws;
  for (int i = 0; i < c.seeds; ++i) {
    seeds[i] = sample_seed(c.seed, i);
    draws.push_back(sample_free(largest, seeds[i]));
  }
  const std::vector<double> times = uniform_times(0.0, c.horizon, sample_intervals(c));
  const std::string id = to_string(c.experiment);
  const std::string mixed_tag = "p=" + short_fmt(c.p) + ";q=" + short_fmt(c.q);

  struct Values {
    std::vector<std::vector<double>> xsb;  // [s,b pair][seed]
    std::vector<double> mixed;
  };
  auto measure = [&](std::size_t k, const std::vector<Trajectory>& trajectories, bool record) {
    Values v;
    v.xsb.resize(c.s.size() * c.b.size());
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
      const Trajectory& t = trajectories[i];
      const SpaceTimeCoefficients stc = time_frequency_transform(t, c.taper);
      for (std::size_t a = 0; a < c.s.size(); ++a) {
        for (std::size_t b = 0; b < c.b.size(); ++b) {
          const double value = xsb_norm(stc, c.s[a], c.b[b]);
          v.xsb[a * c.b.size() + b].push_back(value);
          if (record) report.norms.push_back({id, t.seed, c.modes[k], c.s[a], "b=" + short_fmt(c.b[b]), value});
        }
      }
      v.mixed.push_back(mixed_norm(*bases[k], t, c.mixed_s, c.p, c.q));
      if (record) report.norms.push_back({id, t.seed, c.modes[k], c.mixed_s, mixed_tag, v.mixed.back()});
    }
    return v;
  };

  const FlowConfig flow = flow_config(c);
  std::vector<std::vector<double>> xsb_medians(c.s.size() * c.b.size());
  std::vector<double> mixed_medians;
  std::vector<Values> coarse_values;
  std::vector<double> used_dt;
  for (std::size_t k = 0; k < c.modes.size(); ++k) {
    auto trajectories = evolve_batch(bases[k], heads(draws, c.modes[k], c.model), flow, c.horizon,
                                     times, options.threads);
    std::vector<double> weights;
    for (int i = 0; i < c.seeds; ++i) {
      Trajectory& t = trajectories[i];
      t.seed = seeds[i];
      if (!t.failure.empty()) {
        rec.gate("integrator", false, "seed " + std::to_string(seeds[i]) + ": " + t.failure);
        return report;
      }
      weights.push_back(gibbs_weight(*bases[k], t.states.front(), c.alpha, c.model));
      rec.add(seeds[i], c.modes[k], "gibbs_weight", weights.back());
      rec.add(seeds[i], c.modes[k], "drift", t.drift);
    }
    used_dt.push_back(trajectories.front().dt_used);
    const Values v = measure(k, trajectories, true);
    for (std::size_t j = 0; j < v.xsb.size(); ++j) {
      xsb_medians[j].push_back(weighted_median(v.xsb[j], weights));
      const double s = c.s[j / c.b.size()], b = c.b[j % c.b.size()];
      rec.add(c.seed, c.modes[k], "xsb.s" + short_fmt(s) + ".b" + short_fmt(b) + ".median",
              xsb_medians[j].back());
    }
    mixed_medians.push_back(weighted_median(v.mixed, weights));
    rec.add(c.seed, c.modes[k], "mixed.median", mixed_medians.back());
    coarse_values.push_back(v);
    if (options.keep_trajectories) {
      report.trajectories.insert(report.trajectories.end(), trajectories.begin(), trajectories.end());
    }
  }

  const double xsb_spread = relative_spread(xsb_medians.front());
  const double mixed_spread = relative_spread(mixed_medians);
  rec.add(c.seed, 0, "xsb.spread", xsb_spread);
  rec.add(c.seed, 0, "mixed.spread", mixed_spread);
  report.summary["xsb_medians"] = xsb_medians.front();
  report.summary["mixed_medians"] = mixed_medians;
  rec.gate("xsb proxy N-stable", xsb_spread <= c.stability,
           "s=" + short_fmt(c.s.front()) + ", b=" + short_fmt(c.b.front()) + " medians " +
               list_text(xsb_medians.front()) + ", spread " + short_fmt(xsb_spread));
  rec.gate("mixed norm N-stable", mixed_spread <= c.stability,
           "s=" + short_fmt(c.mixed_s) + ", " + mixed_tag + " medians " + list_text(mixed_medians) +
               ", spread " + short_fmt(mixed_spread));

  if (c.refine) {
    const std::size_t count = std::min<std::size_t>(2, draws.size());
    const std::vector<Coeffs> subset(draws.begin(), draws.begin() + count);
    double change = 0;
    for (std::size_t k = 0; k < c.modes.size(); ++k) {
      FlowConfig half = flow;
      half.dt = 0.5 * used_dt[k];
      auto fine = evolve_batch(bases[k], heads(subset, c.modes[k], c.model), half, c.horizon, times,
                               options.threads);
      for (std::size_t i = 0; i < count; ++i) fine[i].seed = seeds[i];
      const Values v = measure(k, fine, false);
      for (std::size_t i = 0; i < count; ++i) {
        change = std::max(change, std::fabs(v.xsb.front()[i] / coarse_values[k].xsb.front()[i] - 1.0));
        change = std::max(change, std::fabs(v.mixed[i] / coarse_values[k].mixed[i] - 1.0));
      }
    }
    rec.add(c.seed, 0, "refine.max_relative_change", change);
    rec.gate("dt refinement", change <= c.refine_tolerance,
             "max relative change " + short_fmt(change) + " <= " + short_fmt(c.refine_tolerance));
  }

  const DivergenceCheck free = free_divergence(c, c.modes, bases, c.divergence_s, rec,
                                               "free_field.s" + short_fmt(c.divergence_s));
  rec.gate("free-field H^s mean matches partial sum", free.passed,
           "s=" + short_fmt(c.divergence_s) + " z " + list_text(free.z));
  rec.gate("free-field H^s mean grows with N", free.growing, "means " + list_text(free.means));
  return report;
}

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  switch (config.experiment) {
    case Experiment::Invariance: return run_invariance(config, options);
    case Experiment::Convergence: return run_convergence(config, options);
    case Experiment::Smoothing: return run_smoothing(config, options);
    case Experiment::Coupling: return run_coupling(config, options);
    case Experiment::Xsb: return run_xsb(config, options);
    default:
      throw std::invalid_argument("run_experiment: '" + to_string(config.experiment) +
                                  "' is not an experiment");
  }
}

}  // namespace ballgibbs
