#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "ballgibbs/harness.hpp"

namespace ballgibbs {
namespace {

std::string trim(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = text.find_last_not_of(" \t\r");
  return text.substr(first, last - first + 1);
}

std::string lower(std::string text) {
  std::transform(text.begin(), text.end(), text.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return text;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) items.push_back(trim(item));
  return items;
}

template <typename T>
T parse_number(const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw std::invalid_argument("expected a number, got '" + text + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw std::invalid_argument("expected a finite number");
  }
  return value;
}

bool parse_bool(const std::string& text) {
  const std::string v = lower(text);
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + text + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> values;
  for (const std::string& item : split_list(text)) values.push_back(parse_number<T>(item));
  if (values.empty()) throw std::invalid_argument("expected a non-empty list");
  return values;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"experiment", [](ExperimentConfig& c, const std::string& v) { c.experiment = parse_experiment(v); }},
      {"dimension", [](ExperimentConfig& c, const std::string& v) { c.dimension = parse_number<int>(v); }},
      {"model", [](ExperimentConfig& c, const std::string& v) { c.model = parse_model(v); }},
      {"alpha", [](ExperimentConfig& c, const std::string& v) { c.alpha = parse_number<double>(v); }},
      {"modes", [](ExperimentConfig& c, const std::string& v) { c.modes = parse_list<int>(v); }},
      {"reference_modes", [](ExperimentConfig& c, const std::string& v) { c.reference_modes = parse_number<int>(v); }},
      {"horizon", [](ExperimentConfig& c, const std::string& v) { c.horizon = parse_number<double>(v); }},
      {"seed", [](ExperimentConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>(v); }},
      {"seeds", [](ExperimentConfig& c, const std::string& v) { c.seeds = parse_number<int>(v); }},
      {"ensemble", [](ExperimentConfig& c, const std::string& v) { c.ensemble = parse_number<int>(v); }},
      {"output", [](ExperimentConfig& c, const std::string& v) { c.output = v; }},
      {"flow.dt", [](ExperimentConfig& c, const std::string& v) { c.dt = parse_number<double>(v); }},
      {"flow.integrator", [](ExperimentConfig& c, const std::string& v) { c.integrator = parse_integrator(v); }},
      {"flow.drift_tolerance", [](ExperimentConfig& c, const std::string& v) { c.drift_tolerance = parse_number<double>(v); }},
      {"flow.dt_floor", [](ExperimentConfig& c, const std::string& v) { c.dt_floor = parse_number<double>(v); }},
      {"flow.samples_per_unit_time", [](ExperimentConfig& c, const std::string& v) { c.samples_per_unit_time = parse_number<int>(v); }},
      {"flow.refine", [](ExperimentConfig& c, const std::string& v) { c.refine = parse_bool(v); }},
      {"flow.nonlinear_scale", [](ExperimentConfig& c, const std::string& v) { c.nonlinear_scale = parse_number<double>(v); }},
      {"norms.s", [](ExperimentConfig& c, const std::string& v) { c.s = parse_list<double>(v); }},
      {"norms.b", [](ExperimentConfig& c, const std::string& v) { c.b = parse_list<double>(v); }},
      {"norms.p", [](ExperimentConfig& c, const std::string& v) { c.p = parse_number<double>(v); }},
      {"norms.q", [](ExperimentConfig& c, const std::string& v) { c.q = parse_number<double>(v); }},
      {"norms.mixed_s", [](ExperimentConfig& c, const std::string& v) { c.mixed_s = parse_number<double>(v); }},
      {"norms.divergence_s", [](ExperimentConfig& c, const std::string& v) { c.divergence_s = parse_number<double>(v); }},
      {"norms.taper", [](ExperimentConfig& c, const std::string& v) { c.taper = parse_number<double>(v); }},
      {"coupling.bound_sizes", [](ExperimentConfig& c, const std::string& v) { c.bound_sizes = parse_list<int>(v); }},
      {"coupling.n0", [](ExperimentConfig& c, const std::string& v) { c.n0 = parse_number<int>(v); }},
      {"coupling.exponent", [](ExperimentConfig& c, const std::string& v) { c.exponent = parse_number<double>(v); }},
      {"gates.z_threshold", [](ExperimentConfig& c, const std::string& v) { c.z_threshold = parse_number<double>(v); }},
      {"gates.stability", [](ExperimentConfig& c, const std::string& v) { c.stability = parse_number<double>(v); }},
      {"gates.sigma", [](ExperimentConfig& c, const std::string& v) { c.sigma = parse_number<double>(v); }},
      {"gates.min_ess", [](ExperimentConfig& c, const std::string& v) { c.min_ess = parse_number<double>(v); }},
      {"gates.gate_s", [](ExperimentConfig& c, const std::string& v) { c.gate_s = parse_number<double>(v); }},
      {"gates.bound_band", [](ExperimentConfig& c, const std::string& v) { c.bound_band = parse_number<double>(v); }},
      {"gates.r_squared", [](ExperimentConfig& c, const std::string& v) { c.r_squared = parse_number<double>(v); }},
      {"gates.slope_band", [](ExperimentConfig& c, const std::string& v) { c.slope_band = parse_number<double>(v); }},
      {"gates.refine_tolerance", [](ExperimentConfig& c, const std::string& v) { c.refine_tolerance = parse_number<double>(v); }},
      {"gates.free_ensemble", [](ExperimentConfig& c, const std::string& v) { c.free_ensemble = parse_number<int>(v); }},
      {"invariance.negative_control", [](ExperimentConfig& c, const std::string& v) { c.negative_control = parse_bool(v); }},
  };
  return table;
}

struct Entry {
  int line;
  std::string key;
  std::string value;
};

std::string fmt(double x) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", x);
  return buffer;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

// Defaults that follow from other settings unless given explicitly.
void derive(ExperimentConfig& c) {
  auto given = [&](const char* key) { return c.explicit_keys.count(key) > 0; };
  if (c.experiment == Experiment::Smoothing) {
    const double threshold = (5.0 - c.alpha) / 2.0;
    if (!given("norms.s")) c.s = {0.5 * threshold, 0.8 * threshold, 0.9 * threshold, 1.2 * threshold};
    if (!given("gates.gate_s")) c.gate_s = 0.8 * threshold;
  }
}

}  // namespace

std::string to_string(Experiment experiment) {
  switch (experiment) {
    case Experiment::Basis: return "basis";
    case Experiment::Sample: return "sample";
    case Experiment::Evolve: return "evolve";
    case Experiment::Invariance: return "invariance";
    case Experiment::Convergence: return "convergence";
    case Experiment::Smoothing: return "smoothing";
    case Experiment::Coupling: return "coupling";
    case Experiment::Xsb: return "xsb";
  }
  return "unknown";
}

Experiment parse_experiment(const std::string& text) {
  const std::string v = lower(trim(text));
  for (Experiment e : {Experiment::Basis, Experiment::Sample, Experiment::Evolve,
                       Experiment::Invariance, Experiment::Convergence, Experiment::Smoothing,
                       Experiment::Coupling, Experiment::Xsb}) {
    if (v == to_string(e)) return e;
  }
  throw std::invalid_argument("unknown experiment '" + text + "'");
}

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error([&] {
        std::string message = "invalid configuration:";
        for (const auto& v : violations) message += "\n  " + v;
        return message;
      }()),
      violations_(std::move(violations)) {}

ExperimentConfig default_config(Experiment experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  switch (experiment) {
    case Experiment::Basis:
      c.modes = {64};
      break;
    case Experiment::Sample:
      c.modes = {64};
      c.ensemble = 16;
      break;
    case Experiment::Evolve:
      c.modes = {32};
      c.seeds = 1;
      break;
    case Experiment::Invariance:
      c.modes = {16};
      c.ensemble = 2000;
      c.s = {0.25};
      c.stability = 0.25;
      break;
    case Experiment::Convergence:
      c.modes = {16, 32, 64, 128};
      c.reference_modes = 256;
      c.horizon = 0.5;
      c.s = {0.4};
      c.dt = 5e-5;
      c.drift_tolerance = 1e-2;
      break;
    case Experiment::Smoothing:
      c.model = Model::NLW;
      c.modes = {16, 32, 64, 128};
      // The s = 1.2 median spread sits near 0.23; fewer seeds leave the
      // gate dominated by sampling noise of the medians.
      c.seeds = 400;
      c.stability = 0.25;
      break;
    case Experiment::Coupling:
      c.modes = {32};
      break;
    case Experiment::Xsb:
      c.modes = {16, 32, 64, 128};
      c.seeds = 8;
      c.s = {0.4};
      c.b = {0.7};
      c.dt = 1e-4;
      c.drift_tolerance = 1e-2;
      c.stability = 0.2;
      break;
  }
  derive(c);
  return c;
}

ExperimentConfig parse_config(const std::string& text, std::optional<Experiment> implied) {
  std::vector<std::string> errors;
  std::vector<Entry> entries;
  std::map<std::string, int> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(number) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back(where + "malformed section header '" + line + "'");
        continue;
      }
      section = lower(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(where + "expected key = value, got '" + line + "'");
      continue;
    }
    std::string key = lower(trim(line.substr(0, eq)));
    const std::string value = trim(line.substr(eq + 1));
    if (!section.empty()) key = section + "." + key;
    if (!setters().count(key)) {
      errors.push_back(where + "unknown key '" + key + "'");
      continue;
    }
    if (auto it = seen.find(key); it != seen.end()) {
      errors.push_back(where + "duplicate key '" + key + "' (first set on line " +
                       std::to_string(it->second) + ")");
      continue;
    }
    seen[key] = number;
    entries.push_back({number, key, value});
  }

  std::optional<Experiment> stated;
  for (const Entry& e : entries) {
    if (e.key != "experiment") continue;
    try {
      stated = parse_experiment(e.value);
    } catch (const std::exception& ex) {
      errors.push_back("line " + std::to_string(e.line) + ": experiment: " + ex.what());
    }
  }
  if (stated && implied && *stated != *implied) {
    errors.push_back("experiment '" + to_string(*stated) + "' does not match the requested '" +
                     to_string(*implied) + "'");
  }
  const std::optional<Experiment> chosen = implied ? implied : stated;
  if (!chosen && !seen.count("experiment")) errors.push_back("missing required key 'experiment'");

  ExperimentConfig config = default_config(chosen.value_or(Experiment::Invariance));
  for (const Entry& e : entries) {
    if (e.key == "experiment") continue;
    try {
      setters().at(e.key)(config, e.value);
      config.explicit_keys.insert(e.key);
    } catch (const std::exception& ex) {
      errors.push_back("line " + std::to_string(e.line) + ": " + e.key + ": " + ex.what());
    }
  }
  derive(config);
  for (auto& v : validate(config)) errors.push_back(std::move(v));
  if (!errors.empty()) throw ConfigError(errors);
  return config;
}

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> v;
  const Experiment e = c.experiment;
  if (c.dimension != 2 && c.dimension != 3) v.push_back("dimension must be 2 or 3");
  if (!(c.alpha > 0)) v.push_back("alpha must be positive");
  if (c.model == Model::NLW && !(c.alpha < 4)) {
    v.push_back("model NLW requires alpha < 4 (subquartic wave nonlinearity); got alpha = " +
                fmt(c.alpha));
  }
  if (c.modes.empty()) v.push_back("modes must list at least one N");
  for (int n : c.modes) {
    if (n < 1) v.push_back("modes entries must be >= 1");
  }
  if (!std::is_sorted(c.modes.begin(), c.modes.end()) ||
      std::adjacent_find(c.modes.begin(), c.modes.end()) != c.modes.end()) {
    v.push_back("modes must be strictly increasing");
  }
  if (!(c.horizon > 0)) v.push_back("horizon must be positive");
  if (c.seeds < 1) v.push_back("seeds must be >= 1");
  if (c.dt < 0) v.push_back("flow.dt must be >= 0 (0 selects the default step)");
  if (!(c.drift_tolerance > 0)) v.push_back("flow.drift_tolerance must be positive");
  if (!(c.dt_floor > 0)) v.push_back("flow.dt_floor must be positive");
  if (c.samples_per_unit_time < 1) v.push_back("flow.samples_per_unit_time must be >= 1");
  if (c.p < 1 || c.q < 1) v.push_back("norms.p and norms.q must be >= 1");
  for (double b : c.b) {
    if (b < 0) v.push_back("norms.b entries must be >= 0");
  }
  if (c.taper < 0 || c.taper > 1) v.push_back("norms.taper must lie in [0, 1]");
  if (c.free_ensemble < 2) v.push_back("gates.free_ensemble must be >= 2");

  if (e == Experiment::Invariance && c.ensemble < 500) {
    v.push_back("invariance needs ensemble >= 500");
  }
  if (e == Experiment::Sample && c.ensemble < 1) v.push_back("ensemble must be >= 1");
  if (e == Experiment::Convergence) {
    if (c.modes.size() < 4) v.push_back("convergence needs at least 4 values in modes");
    if (!c.modes.empty() && c.reference_modes <= c.modes.back()) {
      v.push_back("reference_modes must exceed every entry of modes");
    }
    if (c.model == Model::NLS && c.dimension == 2 &&
        !(c.alpha >= 2 && std::fmod(c.alpha, 2.0) == 0.0)) {
      v.push_back("convergence for NLS in d = 2 requires an even integer alpha >= 2");
    }
    if (c.model == Model::NLS && c.dimension == 3 && c.alpha != 2.0) {
      v.push_back("convergence for NLS in d = 3 requires alpha = 2 (cubic case)");
    }
  }
  if (e == Experiment::Smoothing && c.model != Model::NLW) {
    v.push_back("smoothing requires model NLW");
  }
  if (e == Experiment::Coupling) {
    if (c.bound_sizes.size() < 2) v.push_back("coupling.bound_sizes needs two or more sizes");
    for (int n : c.bound_sizes) {
      if (n < 1 || n > 64) v.push_back("coupling.bound_sizes entries must lie in [1, 64] (cost gate)");
    }
    if (c.n0 < 16) v.push_back("coupling.n0 must be >= 16");
  }
  if (e == Experiment::Xsb && c.horizon * c.samples_per_unit_time < kMinTransformSamples) {
    v.push_back("xsb needs horizon * flow.samples_per_unit_time >= " +
                std::to_string(kMinTransformSamples));
  }
  return v;
}

std::string canonical_text(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "experiment=" << to_string(c.experiment) << '\n'
      << "dimension=" << c.dimension << '\n'
      << "model=" << to_string(c.model) << '\n'
      << "alpha=" << fmt(c.alpha) << '\n'
      << "modes=" << join(c.modes) << '\n'
      << "reference_modes=" << c.reference_modes << '\n'
      << "horizon=" << fmt(c.horizon) << '\n'
      << "seed=" << c.seed << '\n'
      << "seeds=" << c.seeds << '\n'
      << "ensemble=" << c.ensemble << '\n'
      << "flow.dt=" << fmt(c.dt) << '\n'
      << "flow.integrator=" << to_string(c.integrator) << '\n'
      << "flow.drift_tolerance=" << fmt(c.drift_tolerance) << '\n'
      << "flow.dt_floor=" << fmt(c.dt_floor) << '\n'
      << "flow.samples_per_unit_time=" << c.samples_per_unit_time << '\n'
      << "flow.refine=" << (c.refine ? "true" : "false") << '\n'
      << "flow.nonlinear_scale=" << fmt(c.nonlinear_scale) << '\n'
      << "norms.s=" << join(c.s) << '\n'
      << "norms.b=" << join(c.b) << '\n'
      << "norms.p=" << fmt(c.p) << '\n'
      << "norms.q=" << fmt(c.q) << '\n'
      << "norms.mixed_s=" << fmt(c.mixed_s) << '\n'
      << "norms.divergence_s=" << fmt(c.divergence_s) << '\n'
      << "norms.taper=" << fmt(c.taper) << '\n'
      << "coupling.bound_sizes=" << join(c.bound_sizes) << '\n'
      << "coupling.n0=" << c.n0 << '\n'
      << "coupling.exponent=" << fmt(c.exponent) << '\n'
      << "gates.z_threshold=" << fmt(c.z_threshold) << '\n'
      << "gates.stability=" << fmt(c.stability) << '\n'
      << "gates.sigma=" << fmt(c.sigma) << '\n'
      << "gates.min_ess=" << fmt(c.min_ess) << '\n'
      << "gates.gate_s=" << fmt(c.gate_s) << '\n'
      << "gates.bound_band=" << fmt(c.bound_band) << '\n'
      << "gates.r_squared=" << fmt(c.r_squared) << '\n'
      << "gates.slope_band=" << fmt(c.slope_band) << '\n'
      << "gates.refine_tolerance=" << fmt(c.refine_tolerance) << '\n'
      << "gates.free_ensemble=" << c.free_ensemble << '\n'
      << "invariance.negative_control=" << (c.negative_control ? "true" : "false") << '\n';
  return out.str();
}

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_text(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(h));
  return buffer;
}

}  // namespace ballgibbs
