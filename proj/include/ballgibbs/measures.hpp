#pragma once

#include <cstdint>
#include <complex>
#include <functional>
#include <span>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ballgibbs/dynamics.hpp"
#include "ballgibbs/eigenbasis.hpp"

namespace ballgibbs {

/// Seeded source of normalised complex Gaussians (E g = 0, E|g|^2 = 1, real and
/// imaginary parts i.i.d. N(0, 1/2)). mt19937_64 seeded through splitmix64,
/// Box-Muller on 53-bit uniforms: bit-identical across platforms.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed);
  std::complex<double> next();

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Seed of sample `index` in an ensemble drawn from `base_seed`.
inline std::uint64_t sample_seed(std::uint64_t base_seed, std::uint64_t index) {
  return base_seed ^ index;
}

/// phi_n = g_n / z_n: a draw of the free measure, covariance (-Delta)^{-1}.
/// Draws are sequential in n, so the first N coefficients of a draw at
/// N' > N coincide with the draw at N (shared-omega coupling).
Coeffs sample_free(const EigenBasis& basis, std::uint64_t seed);
Coeffs sample_free(const Eigen::VectorXd& frequencies, std::uint64_t seed);

/// exp(-V(phi)) with V the potential part of the Hamiltonian:
/// (2/(alpha+2)) int |phi|^{alpha+2} (NLS) or |Re phi|^{alpha+2} (NLW).
double gibbs_weight(const EigenBasis& basis, const Coeffs& coeffs, double alpha, Model model);

struct WeightedSample {
  Coeffs coeffs;
  double weight = 1.0;
  std::uint64_t seed = 0;
};

struct Ensemble {
  std::vector<WeightedSample> samples;
  Model model = Model::NLS;
  double alpha = 2.0;
  std::shared_ptr<const EigenBasis> basis;
};

/// Draws `count` free samples with seeds base_seed ^ index and weights them.
/// `threads` workers, results ordered by index.
Ensemble draw_ensemble(std::shared_ptr<const EigenBasis> basis, Model model, double alpha,
                       std::size_t count, std::uint64_t base_seed, int threads = 1);

struct Estimate {
  double mean = 0.0;
  double standard_error = 0.0;
  double effective_sample_size = 0.0;
};

/// Self-normalised importance estimate sum w_i F_i / sum w_i with a
/// delta-method standard error and Kish effective sample size.
Estimate weighted_expectation(std::span<const double> weights, std::span<const double> values);
Estimate weighted_expectation(const Ensemble& ensemble,
                              const std::function<double(const Coeffs&)>& observable);

/// f1_n = Re phi_n, f2_n = z_n Im phi_n  (phi = f1 + i (sqrt(-Delta))^{-1} f2).
std::pair<Eigen::VectorXd, Eigen::VectorXd> nlw_data_split(const EigenBasis& basis,
                                                           const Coeffs& coeffs);
Coeffs nlw_data_merge(const EigenBasis& basis, const Eigen::VectorXd& f1,
                      const Eigen::VectorXd& f2);

/// One JSON object per line: {"seed":..,"weight":..,"coeffs":[re,im,...]}.
std::string ensemble_to_jsonl(const Ensemble& ensemble);
std::vector<WeightedSample> ensemble_from_jsonl(const std::string& text);

}  // namespace ballgibbs
