#include "ballgibbs/spacetime_norms.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace ballgibbs {
namespace {

using cd = std::complex<double>;

const Trajectory& require_samples(const Trajectory& trajectory) {
  if (!trajectory.basis || trajectory.states.empty()) {
    throw std::invalid_argument("trajectory has no samples");
  }
  return trajectory;
}

double uniform_step(const std::vector<double>& times) {
  if (static_cast<int>(times.size()) < kMinTransformSamples) {
    throw std::invalid_argument("time_frequency_transform: at least " +
                                std::to_string(kMinTransformSamples) + " samples required");
  }
  const double step = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  if (!(step > 0)) throw std::invalid_argument("time_frequency_transform: empty time span");
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (std::fabs(times[k] - times[k - 1] - step) > 1e-9 * step) {
      throw std::invalid_argument("time_frequency_transform: non-uniform sampling");
    }
  }
  return step;
}

Eigen::VectorXd window_values(const std::vector<double>& times, double taper) {
  const double t0 = times.front(), span = times.back() - times.front();
  Eigen::VectorXd w(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) w[k] = tukey((times[k] - t0) / span, taper);
  return w;
}

double scaled_power(double z, double z1, double s) { return std::pow(z / z1, 2.0 * s); }

}  // namespace

double sobolev_norm(const Eigen::VectorXd& frequencies, const Coeffs& coeffs, double s) {
  if (frequencies.size() < coeffs.size()) {
    throw std::invalid_argument("sobolev_norm: fewer frequencies than coefficients");
  }
  double sum = 0;
  for (Eigen::Index n = 0; n < coeffs.size(); ++n) {
    sum += std::pow(frequencies[n], 2.0 * s) * std::norm(coeffs[n]);
  }
  return std::sqrt(sum);
}

double sobolev_norm(const EigenBasis& basis, const Coeffs& coeffs, double s) {
  return sobolev_norm(basis.frequencies(), coeffs, s);
}

double free_sobolev_mean(const Eigen::VectorXd& frequencies, int modes, double s) {
  return frequencies.head(modes).array().pow(2.0 * s - 2.0).sum();
}

double free_sobolev_variance(const Eigen::VectorXd& frequencies, int modes, double s) {
  return frequencies.head(modes).array().pow(4.0 * s - 4.0).sum();
}

void validate(const NormParams& params) {
  if (!std::isfinite(params.s) || !std::isfinite(params.b) || !std::isfinite(params.p) ||
      !std::isfinite(params.q)) {
    throw std::invalid_argument("norm parameters must be finite");
  }
  if (params.p < 1 || params.q < 1) throw std::invalid_argument("norm exponents need p, q >= 1");
}

double tukey(double x, double taper) {
  if (x < 0 || x > 1) return 0.0;
  if (taper <= 0) return 1.0;
  const double half = 0.5 * std::min(taper, 1.0);
  const double edge = std::min(x, 1.0 - x);
  if (edge >= half) return 1.0;
  return 0.5 * (1.0 - std::cos(std::numbers::pi * edge / half));
}

SpaceTimeCoefficients time_frequency_transform(const Trajectory& trajectory, double taper,
                                               int padding) {
  require_samples(trajectory);
  if (padding < 1) throw std::invalid_argument("time_frequency_transform: padding must be >= 1");
  if (taper < 0 || taper > 1) throw std::invalid_argument("time_frequency_transform: taper in [0,1]");
  const double step = uniform_step(trajectory.times);
  const EigenBasis& basis = *trajectory.basis;
  const int modes = trajectory.modes();
  const int samples = static_cast<int>(trajectory.size());
  int length = padding * samples;
  if (length % 2 == 0) ++length;
  const int half = (length - 1) / 2;

  SpaceTimeCoefficients stc;
  stc.dimension = basis.dimension();
  stc.model = trajectory.config.model;
  stc.frequencies = basis.frequencies().head(modes);
  stc.dispersion = dispersion(basis, stc.model).head(modes);
  stc.sample_dt = step;
  stc.duration = trajectory.times.back() - trajectory.times.front();
  stc.samples = samples;
  stc.taper = taper;
  stc.padding = padding;
  const double domega = 2.0 * std::numbers::pi / (length * step);
  stc.offsets.resize(length);
  for (int j = 0; j < length; ++j) stc.offsets[j] = (j - half) * domega;
  stc.amplitudes.resize(modes, length);

  const Eigen::VectorXd window = window_values(trajectory.times, taper);
  const double t0 = trajectory.times.front();
  Eigen::FFT<double> fft;
  std::vector<cd> in(length), out;
  for (int n = 0; n < modes; ++n) {
    std::fill(in.begin(), in.end(), cd(0.0, 0.0));
    const double omega = stc.dispersion[n];
    for (int k = 0; k < samples; ++k) {
      const double t = trajectory.times[k];
      in[k] = window[k] * trajectory.states[k][n] * std::polar(1.0, omega * t);
    }
    fft.fwd(out, in);
    for (int j = 0; j < length; ++j) {
      const int source = (j - half + length) % length;
      stc.amplitudes(n, j) = step * out[source] * std::polar(1.0, -stc.offsets[j] * t0);
    }
  }
  return stc;
}

Eigen::VectorXd windowed_mode_energy(const Trajectory& trajectory, double taper) {
  require_samples(trajectory);
  const double step = uniform_step(trajectory.times);
  const Eigen::VectorXd window = window_values(trajectory.times, taper);
  Eigen::VectorXd energy = Eigen::VectorXd::Zero(trajectory.modes());
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    energy += window[k] * window[k] * trajectory.states[k].cwiseAbs2();
  }
  return step * energy;
}

double xsb_norm(const SpaceTimeCoefficients& stc, double s, double b) {
  if (b < 0) throw std::invalid_argument("xsb_norm: b must be >= 0");
  if (stc.modes() == 0) return 0.0;
  const Eigen::VectorXd modulation = (1.0 + stc.offsets.array().square()).pow(b).matrix();
  const double z1 = stc.frequencies[0];
  double sum = 0;
  for (int n = 0; n < stc.modes(); ++n) {
    sum += scaled_power(stc.frequencies[n], z1, s) *
           stc.amplitudes.row(n).cwiseAbs2().dot(modulation.transpose());
  }
  return std::sqrt(sum * stc.cycle_step());
}

double windowed_sobolev_integral(const Trajectory& trajectory, double s, double taper) {
  const Eigen::VectorXd energy = windowed_mode_energy(trajectory, taper);
  const Eigen::VectorXd& z = trajectory.basis->frequencies();
  double sum = 0;
  for (Eigen::Index n = 0; n < energy.size(); ++n) sum += scaled_power(z[n], z[0], s) * energy[n];
  return std::sqrt(sum);
}

double mixed_norm(const EigenBasis& basis, const Trajectory& trajectory, double s, double p,
                  double q) {
  validate(NormParams{s, 0.0, p, q});
  require_samples(trajectory);
  const int modes = trajectory.modes();
  const auto samples = static_cast<Eigen::Index>(trajectory.size());
  const Eigen::RowVectorXd scale = basis.frequencies().head(modes).array().pow(s).transpose();
  Eigen::MatrixXcd coeffs(samples, modes);
  for (Eigen::Index k = 0; k < samples; ++k) {
    coeffs.row(k) = trajectory.states[k].transpose().cwiseProduct(scale.cast<cd>());
  }
  Eigen::MatrixXcd grid;
  basis.synthesize_rows(coeffs, grid);

  Eigen::VectorXd tau = Eigen::VectorXd::Zero(samples);
  for (Eigen::Index k = 0; k + 1 < samples; ++k) {
    const double h = trajectory.times[k + 1] - trajectory.times[k];
    tau[k] += 0.5 * h;
    tau[k + 1] += 0.5 * h;
  }
  if (samples == 1) tau[0] = 1.0;

  double outer = 0;
  for (Eigen::Index j = 0; j < grid.cols(); ++j) {
    double inner = 0;
    for (Eigen::Index k = 0; k < samples; ++k) inner += tau[k] * std::pow(std::abs(grid(k, j)), q);
    outer += basis.weights()[j] * std::pow(inner, p / q);
  }
  return std::pow(outer, 1.0 / p);
}

double linear_deviation(const EigenBasis& basis, const Trajectory& trajectory,
                        const SpectralState& phi, double s) {
  require_samples(trajectory);
  const int modes = trajectory.modes();
  if (phi.coeffs.size() < modes) {
    throw std::invalid_argument("linear_deviation: initial data has fewer modes than trajectory");
  }
  const Coeffs projected = phi.coeffs.head(modes);
  const double scale = 1.0 + projected.norm();
  if ((trajectory.states.front() - projected).norm() > 1e-10 * scale) {
    throw std::invalid_argument("linear_deviation: trajectory does not start at P_N phi");
  }
  const Model model = trajectory.config.model;
  const double t0 = trajectory.times.front();
  double worst = 0;
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    const Coeffs free = linear_flow(basis, projected, trajectory.times[k] - t0, model);
    worst = std::max(worst, sobolev_norm(basis, trajectory.states[k] - free, s));
  }
  return worst;
}

double trajectory_distance(const Trajectory& a, const Trajectory& b, double s) {
  require_samples(a);
  require_samples(b);
  if (a.basis->dimension() != b.basis->dimension()) {
    throw std::invalid_argument("trajectory_distance: dimensions differ");
  }
  if (a.size() != b.size()) throw std::invalid_argument("trajectory_distance: time grids differ");
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (std::fabs(a.times[k] - b.times[k]) > 1e-12 * (1.0 + std::fabs(a.times[k]))) {
      throw std::invalid_argument("trajectory_distance: time grids differ");
    }
  }
  const Trajectory& longer = a.modes() >= b.modes() ? a : b;
  const Trajectory& shorter = a.modes() >= b.modes() ? b : a;
  const Eigen::VectorXd& z = longer.basis->frequencies();
  const int m = shorter.modes();
  double worst = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    Coeffs diff = longer.states[k];
    diff.head(m) -= shorter.states[k];
    worst = std::max(worst, sobolev_norm(z, diff, s));
  }
  return worst;
}

std::string norm_csv(const std::vector<NormRow>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "experiment,seed,N,s,parameter,value\n";
  for (const NormRow& row : rows) {
    out << row.experiment << ',' << row.seed << ',' << row.modes << ',' << row.s << ','
        << row.parameter << ',' << row.value << '\n';
  }
  return out.str();
}

}  // namespace ballgibbs
