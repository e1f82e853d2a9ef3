#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ballgibbs/eigenbasis.hpp"

namespace ballgibbs {

enum class Model { NLS, NLW };
enum class Integrator { ExponentialRK4, Strang };

std::string to_string(Model model);
Model parse_model(const std::string& text);
std::string to_string(Integrator integrator);
Integrator parse_integrator(const std::string& text);

/// Coefficients u_1..u_N of a field at one time. For NLW the field is the
/// combined variable u = w + i (sqrt(-Delta))^{-1} w_t.
struct SpectralState {
  Coeffs coeffs;
  Model model = Model::NLS;
  double time = 0.0;
};

struct FlowConfig {
  Model model = Model::NLS;
  double alpha = 2.0;
  /// Initial step; 0 selects default_dt().
  double dt = 0.0;
  Integrator integrator = Integrator::ExponentialRK4;
  /// Gate on max_t |H(t) - H(0)| / |H(0)| over the sample times.
  double tolerance = 1e-8;
  /// Halving stops below this step.
  double dt_floor = 1e-9;
  /// Multiplies the nonlinear term (1 = the physical flow, 0 = linear flow).
  /// The drift gate then uses kinetic + scale * potential energy.
  double nonlinear_scale = 1.0;
};

/// Linear dispersion frequencies: z_n^2 (NLS) or z_n (NLW).
Eigen::VectorXd dispersion(const EigenBasis& basis, Model model);

/// min(0.1 / Omega_N, 1e-3) with Omega the model's dispersion.
double default_dt(const EigenBasis& basis, Model model);

/// |x|^alpha x style powers on the grid: returns (m2)^(alpha/2), 0^alpha = 0.
double abs_pow(double m2, double alpha);

/// du/dt = -i lambda_n u_n - i P_N(|u|^alpha u)_n
Coeffs nls_rhs(const EigenBasis& basis, const Coeffs& u, double alpha);
/// du/dt = -i z_n u_n - i z_n^{-1} P_N(|Re u|^alpha Re u)_n
Coeffs nlw_rhs(const EigenBasis& basis, const Coeffs& u, double alpha);

/// Exact linear propagator: u_n -> exp(-i Omega_n t) u_n.
Coeffs linear_flow(const EigenBasis& basis, const Coeffs& coeffs, double t, Model model);

/// sum_n |u_n|^2
double mass(const Coeffs& coeffs);
/// (2/(alpha+2)) int |phi|^{alpha+2}  (NLS) or |Re phi|^{alpha+2}  (NLW).
double potential_energy(const EigenBasis& basis, const Coeffs& coeffs, double alpha,
                        Model model);
/// sum_n lambda_n |u_n|^2 + potential_energy.
double hamiltonian(const EigenBasis& basis, const Coeffs& coeffs, double alpha, Model model);

/// Nonlinear part of the right-hand side with reusable scratch space.
/// Works on a single state or on a batch (one member per row).
/// Not thread-safe; one instance per worker.
class NonlinearTerm {
 public:
  NonlinearTerm(const EigenBasis& basis, Model model, double alpha, double scale = 1.0);
  /// out = -i scale * P(|u|^a u)  or  -i scale * z^{-1} P(|Re u|^a Re u)
  void operator()(const Eigen::MatrixXcd& u, Eigen::MatrixXcd& out);
  void operator()(const Coeffs& u, Coeffs& out);

 private:
  const EigenBasis& basis_;
  Model model_;
  double alpha_;
  double scale_;
  Eigen::MatrixXcd grid_, row_in_, row_out_;
  Eigen::MatrixXd real_coeffs_, real_grid_, real_out_;
  Eigen::RowVectorXd inv_freq_;
};

/// Per-member Hamiltonian / mass of a batch (rows = members).
Eigen::VectorXd hamiltonian_rows(const EigenBasis& basis, const Eigen::MatrixXcd& coeffs,
                                 double alpha, Model model);
Eigen::VectorXd potential_energy_rows(const EigenBasis& basis, const Eigen::MatrixXcd& coeffs,
                                      double alpha, Model model);

struct Trajectory {
  std::shared_ptr<const EigenBasis> basis;
  FlowConfig config;
  std::vector<double> times;
  std::vector<Coeffs> states;
  std::vector<double> mass;
  std::vector<double> hamiltonian;
  std::uint64_t seed = 0;
  /// Step actually used after drift-driven halving.
  double dt_used = 0.0;
  /// Relative Hamiltonian drift achieved.
  double drift = 0.0;
  int halvings = 0;
  /// Non-empty when the drift gate could not be met (batch runs only).
  std::string failure;

  std::size_t size() const { return times.size(); }
  int modes() const { return states.empty() ? 0 : static_cast<int>(states.front().size()); }
};

/// Uniform grid t0, t0 + (T - t0)/K, ..., T  (K + 1 points).
std::vector<double> uniform_times(double t0, double horizon, int intervals);

/// Integrates the truncated flow from state0.time to `horizon` in the
/// interaction picture (exact linear phases, RK4 on the rotated nonlinearity),
/// recording states at `sample_times` (state0.time and horizon are always
/// included). Backward integration (horizon < state0.time) is supported.
/// If the Hamiltonian drift exceeds config.tolerance, dt is halved and the
/// run repeated; NumericalError once dt would drop below config.dt_floor.
Trajectory evolve(std::shared_ptr<const EigenBasis> basis, const SpectralState& state0,
                  const FlowConfig& config, double horizon,
                  std::vector<double> sample_times = {});

/// Batched evolve: every member shares dt and sample times and is integrated
/// in a single product per stage. Members failing the drift gate are re-run
/// with halved dt; a member that reaches the floor gets a non-empty `failure`
/// instead of throwing. Members are processed in fixed chunks of `chunk`
/// rows spread over `threads` workers, so results do not depend on threads.
std::vector<Trajectory> evolve_batch(std::shared_ptr<const EigenBasis> basis,
                                     const std::vector<SpectralState>& states,
                                     const FlowConfig& config, double horizon,
                                     std::vector<double> sample_times = {}, int threads = 1,
                                     int chunk = 32);

/// JSON-lines export: one {"t":..,"u":[re,im,...]} object per sample.
std::string trajectory_to_jsonl(const Trajectory& traj);
/// Binary export. Header (little-endian): int32 d, int32 N, float64 alpha,
/// int32 model (0 NLS, 1 NLW), float64 dt, int32 K; then K records of
/// 2N float64 (re, im interleaved). Times are not stored.
std::vector<char> trajectory_to_binary(const Trajectory& traj);

struct BinaryTrajectoryHeader {
  int dimension = 0;
  int modes = 0;
  double alpha = 0;
  Model model = Model::NLS;
  double dt = 0;
  int records = 0;
};
BinaryTrajectoryHeader read_binary_header(const std::vector<char>& bytes);
std::vector<Coeffs> read_binary_records(const std::vector<char>& bytes);

}  // namespace ballgibbs
