#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ballgibbs/dynamics.hpp"
#include "ballgibbs/eigenbasis.hpp"

namespace ballgibbs {

/// (sum_n z_n^{2s} |u_n|^2)^{1/2}. `frequencies` must hold at least coeffs.size() entries.
double sobolev_norm(const Eigen::VectorXd& frequencies, const Coeffs& coeffs, double s);
double sobolev_norm(const EigenBasis& basis, const Coeffs& coeffs, double s);

/// E ||phi||_{H^s}^2 = sum_{n<=N} z_n^{2s-2} under the free measure, and the
/// variance of ||phi||_{H^s}^2, sum z_n^{4s-4}.
double free_sobolev_mean(const Eigen::VectorXd& frequencies, int modes, double s);
double free_sobolev_variance(const Eigen::VectorXd& frequencies, int modes, double s);

struct NormParams {
  double s = 0.0;
  double b = 0.0;
  double p = 2.0;
  double q = 2.0;
};
/// Throws std::invalid_argument unless all finite with p, q >= 1.
void validate(const NormParams& params);

/// Tukey window on [0, 1]: cosine ramps of total fraction `taper`, flat between.
/// taper = 0 is the rectangle, taper = 1 the Hann window.
double tukey(double x, double taper);

/// Per-mode windowed spectra of a trajectory in the interaction picture.
///
/// Mode n is demodulated by its linear phase, v_n(t) = exp(i Omega_n t) u_n(t),
/// tapered, zero padded and transformed:
///
///   f_n(omega) = dt sum_k w(t_k) u_n(t_k) exp(-i omega t_k),  omega = offset_j - Omega_n
///
/// All frequencies are angular. `offsets` is the common grid offset_j = j d_omega,
/// |j| <= (L-1)/2 with L odd, d_omega = 2 pi / (L dt); a purely linear mode
/// therefore peaks at offset 0, i.e. at omega = -Omega_n.
struct SpaceTimeCoefficients {
  int dimension = 0;
  Model model = Model::NLS;
  Eigen::VectorXd frequencies;  // z_n
  Eigen::VectorXd dispersion;   // Omega_n
  Eigen::VectorXd offsets;      // symmetric angular grid, length L
  Eigen::MatrixXcd amplitudes;  // N x L
  double sample_dt = 0.0;
  double duration = 0.0;
  int samples = 0;
  double taper = 0.25;
  int padding = 4;

  double frequency_step() const { return offsets.size() > 1 ? offsets[1] - offsets[0] : 0.0; }
  /// Spectral measure per grid point in cycles, d_omega / (2 pi).
  double cycle_step() const { return 1.0 / (static_cast<double>(offsets.size()) * sample_dt); }
  int modes() const { return static_cast<int>(amplitudes.rows()); }
};

inline constexpr int kMinTransformSamples = 64;

/// Throws std::invalid_argument for non-uniform or too few samples.
SpaceTimeCoefficients time_frequency_transform(const Trajectory& trajectory,
                                               double taper = 0.25, int padding = 4);

/// dt sum_k |w(t_k) u_n(t_k)|^2 per mode: the right-hand side of Parseval.
Eigen::VectorXd windowed_mode_energy(const Trajectory& trajectory, double taper = 0.25);

/// sum_{n,j} (z_n/z_1)^{2s} (1 + |offset_j|^2)^b |f_{n,j}|^2 d_omega / (2 pi), square-rooted.
/// Upper-bound proxy from one windowed representation.
double xsb_norm(const SpaceTimeCoefficients& stc, double s, double b);

/// Windowed time-integrated (z_n/z_1)^{2s}-weighted norm: the b = 0 limit of xsb_norm.
double windowed_sobolev_integral(const Trajectory& trajectory, double s, double taper = 0.25);

/// || (sqrt(-Delta))^s u ||_{L^p_x L^q_t}: trapezoid in t per node, quadrature in x.
double mixed_norm(const EigenBasis& basis, const Trajectory& trajectory, double s, double p,
                  double q);

/// max_k || u(t_k) - exp(-i Omega (t_k - t_0)) P_N phi ||_{H^s}.
/// Throws std::invalid_argument when the trajectory does not start at P_N phi.
double linear_deviation(const EigenBasis& basis, const Trajectory& trajectory,
                        const SpectralState& phi, double s);

/// max_k || a(t_k) - b(t_k) ||_{H^s}, shorter coefficient vectors zero padded.
/// Throws std::invalid_argument for mismatched dimensions or time grids.
double trajectory_distance(const Trajectory& a, const Trajectory& b, double s);

struct NormRow {
  std::string experiment;
  std::uint64_t seed = 0;
  int modes = 0;
  double s = 0.0;
  std::string parameter;  // "b=0.7" or "p=3.9;q=8"
  double value = 0.0;
};

std::string norm_csv(const std::vector<NormRow>& rows);

}  // namespace ballgibbs
