#include "ballgibbs/dynamics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ballgibbs/errors.hpp"
#include "ballgibbs/parallel.hpp"

namespace ballgibbs {
namespace {

using cd = std::complex<double>;
constexpr cd kI{0.0, 1.0};

// Interaction-picture (Lawson) RK4 and Strang stepping over a fixed step h,
// on a batch of states (rows).
class Stepper {
 public:
  Stepper(const EigenBasis& basis, const FlowConfig& config)
      : omega_(dispersion(basis, config.model).transpose()),
        nonlinear_(basis, config.model, config.alpha, config.nonlinear_scale),
        integrator_(config.integrator) {}

  void set_step(double h) {
    if (h == h_) return;
    h_ = h;
    half_ = (-kI * omega_.array() * (0.5 * h)).exp().matrix();
    full_ = half_.array().square().matrix();
  }

  void step(Eigen::MatrixXcd& u) {
    if (integrator_ == Integrator::ExponentialRK4) {
      lawson(u);
    } else {
      strang(u);
    }
  }

 private:
  // Rotate every row by a diagonal phase.
  static auto rot(const Eigen::RowVectorXcd& phase, const Eigen::MatrixXcd& m) {
    return m.array().rowwise() * phase.array();
  }

  // v = e^{iOmega t} u obeys v' = e^{iOmega t} N(e^{-iOmega t} v); classical RK4
  // on v, written back in the original frame.
  void lawson(Eigen::MatrixXcd& u) {
    const double h = h_;
    nonlinear_(u, k1_);
    eu_ = rot(half_, u);
    tmp_ = eu_.array() + (0.5 * h) * rot(half_, k1_);
    nonlinear_(tmp_, k2_);
    tmp_ = eu_ + (0.5 * h) * k2_;
    nonlinear_(tmp_, k3_);
    tmp_ = rot(half_, eu_) + h * rot(half_, k3_);
    nonlinear_(tmp_, k4_);
    k2_ += k3_;
    u = rot(full_, u) + (h / 6.0) * (rot(full_, k1_) + 2.0 * rot(half_, k2_) + k4_.array());
  }

  // Half linear step, one RK4 step of the projected nonlinear flow, half linear step.
  void strang(Eigen::MatrixXcd& u) {
    const double h = h_;
    u = rot(half_, u);
    nonlinear_(u, k1_);
    tmp_ = u + (0.5 * h) * k1_;
    nonlinear_(tmp_, k2_);
    tmp_ = u + (0.5 * h) * k2_;
    nonlinear_(tmp_, k3_);
    tmp_ = u + h * k3_;
    nonlinear_(tmp_, k4_);
    u += (h / 6.0) * (k1_ + 2.0 * (k2_ + k3_) + k4_);
    u = rot(half_, u);
  }

  Eigen::RowVectorXd omega_;
  NonlinearTerm nonlinear_;
  Integrator integrator_;
  double h_ = std::numeric_limits<double>::quiet_NaN();
  Eigen::RowVectorXcd half_, full_;
  Eigen::MatrixXcd k1_, k2_, k3_, k4_, tmp_, eu_;
};

struct BatchRun {
  // [member][sample]
  std::vector<std::vector<Coeffs>> states;
  std::vector<std::vector<double>> hamiltonian, mass;
  std::vector<double> drift;
  std::vector<bool> finite;
};

BatchRun run_batch(const EigenBasis& basis, const Eigen::MatrixXcd& u0,
                   const std::vector<double>& times, const FlowConfig& config, double dt) {
  const auto members = u0.rows();
  Stepper stepper(basis, config);
  BatchRun out;
  out.states.resize(members);
  out.hamiltonian.resize(members);
  out.mass.resize(members);
  out.drift.assign(members, 0.0);
  out.finite.assign(members, true);
  Eigen::MatrixXcd u = u0;
  Eigen::VectorXd h0;
  auto record = [&] {
    // The conserved energy of the flow actually integrated.
    const Eigen::VectorXd h =
        u.cwiseAbs2() * basis.eigenvalues().head(u.cols()) +
        config.nonlinear_scale * potential_energy_rows(basis, u, config.alpha, config.model);
    if (h0.size() == 0) h0 = h;
    for (Eigen::Index b = 0; b < members; ++b) {
      const Coeffs row = u.row(b).transpose();
      if (!row.allFinite()) out.finite[b] = false;
      out.states[b].push_back(row);
      out.mass[b].push_back(row.squaredNorm());
      out.hamiltonian[b].push_back(h[b]);
      if (h0[b] != 0.0) {
        out.drift[b] = std::max(out.drift[b], std::fabs(h[b] - h0[b]) / std::fabs(h0[b]));
      }
      if (!std::isfinite(h[b])) out.drift[b] = std::numeric_limits<double>::infinity();
    }
  };
  record();
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double span = times[k] - times[k - 1];
    const auto steps = std::max<long long>(
        1, static_cast<long long>(std::ceil(std::fabs(span) / dt - 1e-9)));
    stepper.set_step(span / static_cast<double>(steps));
    for (long long i = 0; i < steps; ++i) stepper.step(u);
    record();
  }
  return out;
}

std::vector<double> normalise_times(double t0, double horizon, std::vector<double> times) {
  const double sign = horizon >= t0 ? 1.0 : -1.0;
  if (times.empty() || times.front() != t0) times.insert(times.begin(), t0);
  if (times.back() != horizon) times.push_back(horizon);
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!((times[k] - times[k - 1]) * sign > 0)) {
      throw std::invalid_argument(
          "evolve: sample times must be strictly monotone within [t0, T]");
    }
  }
  return times;
}

}  // namespace

std::string to_string(Model model) { return model == Model::NLS ? "NLS" : "NLW"; }

Model parse_model(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::toupper(c); });
  if (t == "NLS") return Model::NLS;
  if (t == "NLW") return Model::NLW;
  throw std::invalid_argument("unknown model '" + text + "' (expected NLS or NLW)");
}

std::string to_string(Integrator integrator) {
  return integrator == Integrator::ExponentialRK4 ? "exponential-rk4" : "strang";
}

Integrator parse_integrator(const std::string& text) {
  if (text == "exponential-rk4" || text == "erk4") return Integrator::ExponentialRK4;
  if (text == "strang") return Integrator::Strang;
  throw std::invalid_argument("unknown integrator '" + text + "'");
}

Eigen::VectorXd dispersion(const EigenBasis& basis, Model model) {
  if (model == Model::NLS) return basis.eigenvalues();
  return basis.frequencies();
}

double default_dt(const EigenBasis& basis, Model model) {
  const Eigen::VectorXd omega = dispersion(basis, model);
  return std::min(0.1 / omega[omega.size() - 1], 1e-3);
}

double abs_pow(double m2, double alpha) {
  if (m2 == 0.0) return 0.0;
  if (alpha == 2.0) return m2;
  if (alpha == 4.0) return m2 * m2;
  if (alpha == 6.0) return m2 * m2 * m2;
  return std::pow(m2, 0.5 * alpha);
}

NonlinearTerm::NonlinearTerm(const EigenBasis& basis, Model model, double alpha, double scale)
    : basis_(basis), model_(model), alpha_(alpha), scale_(scale) {
  if (!(alpha > 0)) throw std::invalid_argument("nonlinearity exponent must be > 0");
  inv_freq_ = basis.frequencies().cwiseInverse().transpose();
}

void NonlinearTerm::operator()(const Eigen::MatrixXcd& u, Eigen::MatrixXcd& out) {
  if (u.cols() != basis_.modes()) {
    throw DimensionError("nonlinear term: state length does not match basis");
  }
  if (model_ == Model::NLS) {
    basis_.synthesize_rows(u, grid_);
    cd* g = grid_.data();
    for (Eigen::Index j = 0; j < grid_.size(); ++j) g[j] *= abs_pow(std::norm(g[j]), alpha_);
    basis_.analyze_rows(grid_, out);
    out *= cd(0.0, -scale_);
  } else {
    real_coeffs_ = u.real();
    basis_.synthesize_rows_real(real_coeffs_, real_grid_);
    double* g = real_grid_.data();
    for (Eigen::Index j = 0; j < real_grid_.size(); ++j) g[j] *= abs_pow(g[j] * g[j], alpha_);
    basis_.analyze_rows_real(real_grid_, real_out_);
    out = ((real_out_.array().rowwise() * inv_freq_.array()) * -scale_).cast<cd>() * kI;
  }
}

void NonlinearTerm::operator()(const Coeffs& u, Coeffs& out) {
  row_in_ = u.transpose();
  (*this)(row_in_, row_out_);
  out = row_out_.row(0).transpose();
}

Coeffs nls_rhs(const EigenBasis& basis, const Coeffs& u, double alpha) {
  NonlinearTerm term(basis, Model::NLS, alpha);
  Coeffs out;
  term(u, out);
  if (!out.allFinite()) throw NumericalError("nls_rhs: non-finite grid values");
  out -= kI * basis.eigenvalues().cwiseProduct(u);
  return out;
}

Coeffs nlw_rhs(const EigenBasis& basis, const Coeffs& u, double alpha) {
  NonlinearTerm term(basis, Model::NLW, alpha);
  Coeffs out;
  term(u, out);
  if (!out.allFinite()) throw NumericalError("nlw_rhs: non-finite grid values");
  out -= kI * basis.frequencies().cwiseProduct(u);
  return out;
}

Coeffs linear_flow(const EigenBasis& basis, const Coeffs& coeffs, double t, Model model) {
  if (coeffs.size() > basis.modes()) {
    throw DimensionError("linear_flow: coefficient vector longer than basis");
  }
  const Eigen::VectorXd omega = dispersion(basis, model).head(coeffs.size());
  return (-kI * omega.array() * t).exp().matrix().cwiseProduct(coeffs);
}

double mass(const Coeffs& coeffs) { return coeffs.squaredNorm(); }

Eigen::VectorXd potential_energy_rows(const EigenBasis& basis, const Eigen::MatrixXcd& coeffs,
                                      double alpha, Model model) {
  Eigen::MatrixXd density;
  if (model == Model::NLS) {
    Eigen::MatrixXcd grid;
    basis.synthesize_rows(coeffs, grid);
    density = grid.cwiseAbs2();
  } else {
    Eigen::MatrixXd grid;
    basis.synthesize_rows_real(coeffs.real(), grid);
    density = grid.array().square();
  }
  density = density.unaryExpr([alpha](double m2) { return abs_pow(m2, alpha) * m2; });
  return 2.0 / (alpha + 2.0) * (density * basis.weights());
}

Eigen::VectorXd hamiltonian_rows(const EigenBasis& basis, const Eigen::MatrixXcd& coeffs,
                                 double alpha, Model model) {
  const Eigen::VectorXd lambda = basis.eigenvalues().head(coeffs.cols());
  return coeffs.cwiseAbs2() * lambda + potential_energy_rows(basis, coeffs, alpha, model);
}

double potential_energy(const EigenBasis& basis, const Coeffs& coeffs, double alpha,
                        Model model) {
  const Eigen::MatrixXcd row = coeffs.transpose();
  return potential_energy_rows(basis, row, alpha, model)[0];
}

double hamiltonian(const EigenBasis& basis, const Coeffs& coeffs, double alpha, Model model) {
  const Eigen::MatrixXcd row = coeffs.transpose();
  return hamiltonian_rows(basis, row, alpha, model)[0];
}

std::vector<double> uniform_times(double t0, double horizon, int intervals) {
  if (intervals < 1) throw std::invalid_argument("uniform_times: intervals must be >= 1");
  std::vector<double> t(intervals + 1);
  for (int k = 0; k <= intervals; ++k) {
    t[k] = t0 + (horizon - t0) * static_cast<double>(k) / intervals;
  }
  t.back() = horizon;
  return t;
}

std::vector<Trajectory> evolve_batch(std::shared_ptr<const EigenBasis> basis,
                                     const std::vector<SpectralState>& states,
                                     const FlowConfig& config, double horizon,
                                     std::vector<double> sample_times, int threads, int chunk) {
  if (!basis) throw std::invalid_argument("evolve: null basis");
  if (!(config.alpha > 0)) throw std::invalid_argument("evolve: alpha must be > 0");
  if (states.empty()) return {};
  const double t0 = states.front().time;
  for (const auto& s : states) {
    if (s.coeffs.size() != basis->modes()) {
      throw DimensionError("evolve: initial state length does not match basis");
    }
    if (s.model != config.model) {
      throw DimensionError("evolve: initial state model does not match flow config");
    }
    if (s.time != t0) throw DimensionError("evolve: batch members start at different times");
    if (!s.coeffs.allFinite()) throw NumericalError("evolve: non-finite initial state");
  }
  const std::vector<double> times = normalise_times(t0, horizon, std::move(sample_times));
  const double dt0 = config.dt > 0 ? config.dt : default_dt(*basis, config.model);

  std::vector<Trajectory> result(states.size());
  for (auto& tr : result) {
    tr.basis = basis;
    tr.config = config;
    tr.times = times;
  }
  chunk = std::max(1, chunk);
  const std::size_t chunks = (states.size() + chunk - 1) / chunk;
  parallel_for(chunks, threads, [&](std::size_t c) {
    std::vector<std::size_t> pending;
    for (std::size_t i = c * chunk; i < std::min(states.size(), (c + 1) * chunk); ++i) {
      pending.push_back(i);
    }
    double dt = dt0;
    for (int halvings = 0; !pending.empty(); ++halvings) {
      Eigen::MatrixXcd u0(static_cast<Eigen::Index>(pending.size()), basis->modes());
      for (std::size_t r = 0; r < pending.size(); ++r) {
        u0.row(static_cast<Eigen::Index>(r)) = states[pending[r]].coeffs.transpose();
      }
      BatchRun run = run_batch(*basis, u0, times, config, dt);
      std::vector<std::size_t> retry;
      const bool at_floor = dt / 2 < config.dt_floor;
      for (std::size_t r = 0; r < pending.size(); ++r) {
        Trajectory& tr = result[pending[r]];
        const bool ok = run.finite[r] && run.drift[r] <= config.tolerance;
        if (!ok && !at_floor) {
          retry.push_back(pending[r]);
          continue;
        }
        tr.dt_used = dt;
        tr.drift = run.drift[r];
        tr.halvings = halvings;
        if (ok) {
          tr.states = std::move(run.states[r]);
          tr.mass = std::move(run.mass[r]);
          tr.hamiltonian = std::move(run.hamiltonian[r]);
        } else {
          std::ostringstream msg;
          msg << (run.finite[r] ? "Hamiltonian drift " : "non-finite state; drift ")
              << run.drift[r] << " above tolerance " << config.tolerance
              << " at dt floor (dt=" << dt << ")";
          tr.failure = msg.str();
        }
      }
      pending = std::move(retry);
      dt /= 2;
    }
  });
  return result;
}

Trajectory evolve(std::shared_ptr<const EigenBasis> basis, const SpectralState& state0,
                  const FlowConfig& config, double horizon, std::vector<double> sample_times) {
  auto out = evolve_batch(std::move(basis), {state0}, config, horizon, std::move(sample_times));
  if (!out.front().failure.empty()) throw NumericalError("evolve: " + out.front().failure);
  return std::move(out.front());
}

std::string trajectory_to_jsonl(const Trajectory& traj) {
  std::ostringstream out;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const Coeffs& c = traj.states[k];
    std::vector<double> flat(2 * c.size());
    std::memcpy(flat.data(), c.data(), flat.size() * sizeof(double));
    nlohmann::json line = {{"t", traj.times[k]}, {"u", flat}};
    out << line.dump() << '\n';
  }
  return out.str();
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary trajectory layout assumes a little-endian host");

template <typename T>
void put(std::vector<char>& buf, T value) {
  const auto* p = reinterpret_cast<const char*>(&value);
  buf.insert(buf.end(), p, p + sizeof(T));
}

template <typename T>
T get(const std::vector<char>& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw std::runtime_error("binary trajectory: truncated");
  T value;
  std::memcpy(&value, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 4 + 8 + 4;

}  // namespace

std::vector<char> trajectory_to_binary(const Trajectory& traj) {
  std::vector<char> buf;
  const int n = traj.modes();
  buf.reserve(kHeaderBytes + traj.size() * 16 * n);
  put<std::int32_t>(buf, traj.basis ? traj.basis->dimension() : 0);
  put<std::int32_t>(buf, n);
  put<double>(buf, traj.config.alpha);
  put<std::int32_t>(buf, traj.config.model == Model::NLS ? 0 : 1);
  put<double>(buf, traj.dt_used);
  put<std::int32_t>(buf, static_cast<std::int32_t>(traj.size()));
  for (const Coeffs& c : traj.states) {
    const auto* p = reinterpret_cast<const char*>(c.data());
    buf.insert(buf.end(), p, p + 16 * c.size());
  }
  return buf;
}

BinaryTrajectoryHeader read_binary_header(const std::vector<char>& bytes) {
  std::size_t pos = 0;
  BinaryTrajectoryHeader h;
  h.dimension = get<std::int32_t>(bytes, pos);
  h.modes = get<std::int32_t>(bytes, pos);
  h.alpha = get<double>(bytes, pos);
  h.model = get<std::int32_t>(bytes, pos) == 0 ? Model::NLS : Model::NLW;
  h.dt = get<double>(bytes, pos);
  h.records = get<std::int32_t>(bytes, pos);
  return h;
}

std::vector<Coeffs> read_binary_records(const std::vector<char>& bytes) {
  const BinaryTrajectoryHeader h = read_binary_header(bytes);
  std::size_t pos = kHeaderBytes;
  std::vector<Coeffs> out(h.records, Coeffs(h.modes));
  for (auto& c : out) {
    const std::size_t len = 16 * static_cast<std::size_t>(h.modes);
    if (pos + len > bytes.size()) throw std::runtime_error("binary trajectory: truncated");
    std::memcpy(c.data(), bytes.data() + pos, len);
    pos += len;
  }
  return out;
}

}  // namespace ballgibbs
