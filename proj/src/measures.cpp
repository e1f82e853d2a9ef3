#include "ballgibbs/measures.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ballgibbs/errors.hpp"
#include "ballgibbs/parallel.hpp"

namespace ballgibbs {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

GaussianStream::GaussianStream(std::uint64_t seed) {
  std::uint64_t s = seed;
  engine_.seed(splitmix64(s));
}

std::complex<double> GaussianStream::next() {
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * kScale;  // (0, 1]
  const double u2 = static_cast<double>(engine_() >> 11) * kScale;          // [0, 1)
  // Each component N(0, 1/2): radius sqrt(-log u1) instead of sqrt(-2 log u1).
  const double r = std::sqrt(-std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

Coeffs sample_free(const Eigen::VectorXd& frequencies, std::uint64_t seed) {
  GaussianStream stream(seed);
  Coeffs c(frequencies.size());
  for (Eigen::Index n = 0; n < c.size(); ++n) c[n] = stream.next() / frequencies[n];
  return c;
}

Coeffs sample_free(const EigenBasis& basis, std::uint64_t seed) {
  return sample_free(basis.frequencies(), seed);
}

double gibbs_weight(const EigenBasis& basis, const Coeffs& coeffs, double alpha, Model model) {
  if (!(alpha > 0)) throw std::invalid_argument("gibbs_weight: alpha must be > 0");
  const double v = potential_energy(basis, coeffs, alpha, model);
  if (!std::isfinite(v)) {
    throw NumericalError("gibbs_weight: potential energy is not finite");
  }
  return std::exp(-v);
}

Ensemble draw_ensemble(std::shared_ptr<const EigenBasis> basis, Model model, double alpha,
                       std::size_t count, std::uint64_t base_seed, int threads) {
  Ensemble ens;
  ens.model = model;
  ens.alpha = alpha;
  ens.basis = basis;
  ens.samples.resize(count);
  parallel_for(count, threads, [&](std::size_t i) {
    WeightedSample& s = ens.samples[i];
    s.seed = sample_seed(base_seed, i);
    s.coeffs = sample_free(*basis, s.seed);
    s.weight = gibbs_weight(*basis, s.coeffs, alpha, model);
  });
  return ens;
}

Estimate weighted_expectation(std::span<const double> weights, std::span<const double> values) {
  if (weights.empty()) throw std::invalid_argument("weighted_expectation: empty ensemble");
  if (weights.size() != values.size()) {
    throw DimensionError("weighted_expectation: weights and values differ in length");
  }
  double sw = 0, sw2 = 0, swf = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    sw += weights[i];
    sw2 += weights[i] * weights[i];
    swf += weights[i] * values[i];
  }
  if (!(sw > 0)) throw NumericalError("weighted_expectation: all weights are zero");
  Estimate e;
  e.mean = swf / sw;
  double var = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double d = weights[i] * (values[i] - e.mean);
    var += d * d;
  }
  e.standard_error = std::sqrt(var) / sw;
  e.effective_sample_size = sw * sw / sw2;
  return e;
}

Estimate weighted_expectation(const Ensemble& ensemble,
                              const std::function<double(const Coeffs&)>& observable) {
  std::vector<double> w, f;
  w.reserve(ensemble.samples.size());
  f.reserve(ensemble.samples.size());
  for (const auto& s : ensemble.samples) {
    w.push_back(s.weight);
    f.push_back(observable(s.coeffs));
  }
  return weighted_expectation(w, f);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> nlw_data_split(const EigenBasis& basis,
                                                           const Coeffs& coeffs) {
  if (coeffs.size() > basis.modes()) throw DimensionError("nlw_data_split: too many modes");
  const Eigen::VectorXd z = basis.frequencies().head(coeffs.size());
  return {coeffs.real(), z.cwiseProduct(coeffs.imag())};
}

Coeffs nlw_data_merge(const EigenBasis& basis, const Eigen::VectorXd& f1,
                      const Eigen::VectorXd& f2) {
  if (f1.size() != f2.size() || f1.size() > basis.modes()) {
    throw DimensionError("nlw_data_merge: inconsistent lengths");
  }
  const Eigen::VectorXd z = basis.frequencies().head(f1.size());
  Coeffs c(f1.size());
  c.real() = f1;
  c.imag() = f2.cwiseQuotient(z);
  return c;
}

std::string ensemble_to_jsonl(const Ensemble& ensemble) {
  std::ostringstream out;
  for (const auto& s : ensemble.samples) {
    std::vector<double> flat(2 * s.coeffs.size());
    std::memcpy(flat.data(), s.coeffs.data(), flat.size() * sizeof(double));
    nlohmann::json line = {{"seed", s.seed}, {"weight", s.weight}, {"coeffs", flat}};
    out << line.dump() << '\n';
  }
  return out.str();
}

std::vector<WeightedSample> ensemble_from_jsonl(const std::string& text) {
  std::vector<WeightedSample> out;
  std::istringstream in(text);
  std::string line;
  std::unordered_set<std::uint64_t> seeds;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    WeightedSample s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.weight = j.at("weight").get<double>();
    const auto flat = j.at("coeffs").get<std::vector<double>>();
    if (flat.size() % 2 != 0) throw std::runtime_error("ensemble jsonl: odd coefficient array");
    s.coeffs.resize(static_cast<Eigen::Index>(flat.size() / 2));
    for (Eigen::Index n = 0; n < s.coeffs.size(); ++n) s.coeffs[n] = {flat[2 * n], flat[2 * n + 1]};
    if (!seeds.insert(s.seed).second) {
      throw std::runtime_error("ensemble jsonl: duplicate seed " + std::to_string(s.seed));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace ballgibbs
