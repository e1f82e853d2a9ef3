#include "ballgibbs/eigenbasis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "ballgibbs/bessel.hpp"
#include "ballgibbs/errors.hpp"

namespace ballgibbs {
namespace {

constexpr double kPi = std::numbers::pi;

// sin(x)/x and (x cos x - sin x)/x^2 with their Taylor forms near 0.
double sinc(double x) {
  if (std::fabs(x) < 1e-3) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0));
  }
  return std::sin(x) / x;
}

double sinc_derivative(double x) {
  if (std::fabs(x) < 1e-3) {
    const double x2 = x * x;
    return -x / 3.0 * (1.0 - x2 / 10.0 * (1.0 - x2 / 28.0));
  }
  return (x * std::cos(x) - std::sin(x)) / (x * x);
}

double surface_area(int d) { return d == 2 ? 2.0 * kPi : 4.0 * kPi; }

}  // namespace

void gauss_legendre(int m, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  if (m < 1) throw std::invalid_argument("gauss_legendre: m must be >= 1");
  nodes.resize(m);
  weights.resize(m);
  // Returns P_m(x) and writes P_m'(x).
  auto legendre = [m](double x, double& dp) {
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= m; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = m * (x * p1 - p0) / (x * x - 1.0);
    return p1;
  };
  for (int i = 0; i < (m + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (m + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      const double dx = legendre(x, dp) / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-16) break;
    }
    legendre(x, dp);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // [-1, 1] -> (0, 1), ascending.
    nodes[i] = 0.5 * (1.0 - x);
    nodes[m - 1 - i] = 0.5 * (1.0 + x);
    weights[i] = weights[m - 1 - i] = 0.5 * w;
  }
}

EigenBasis::EigenBasis(int dimension, int modes, int nodes)
    : dimension_(dimension), modes_(modes) {
  if (dimension != 2 && dimension != 3) {
    throw std::invalid_argument("EigenBasis: dimension must be 2 or 3");
  }
  if (modes < 1) throw std::invalid_argument("EigenBasis: N must be >= 1");
  if (nodes < 2 * modes) throw std::invalid_argument("EigenBasis: need M >= 2N");

  frequencies_.resize(modes);
  norms_.resize(modes);
  for (int n = 1; n <= modes; ++n) {
    if (dimension == 3) {
      frequencies_[n - 1] = n * kPi;
      norms_[n - 1] = 1.0 / std::sqrt(2.0 * kPi);
    } else {
      const double z = bessel::j0_zero(n);
      frequencies_[n - 1] = z;
      norms_[n - 1] = 1.0 / (std::sqrt(kPi) * std::fabs(bessel::j1(z)));
    }
  }

  gauss_legendre(nodes, radii_, weights_);
  const double area = surface_area(dimension);
  for (int j = 0; j < nodes; ++j) {
    weights_[j] *= area * std::pow(radii_[j], dimension - 1);
  }

  values_.resize(modes, nodes);
  Eigen::MatrixXd grad(modes, nodes);
  for (int n = 1; n <= modes; ++n) {
    for (int j = 0; j < nodes; ++j) {
      values_(n - 1, j) = eval(n, radii_[j]);
      grad(n - 1, j) = eval_derivative(n, radii_[j]);
    }
  }
  weighted_ = (values_ * weights_.asDiagonal()).transpose();

  const Eigen::MatrixXd gram = values_ * weighted_;
  orthonormality_residual_ =
      (gram - Eigen::MatrixXd::Identity(modes, modes)).cwiseAbs().maxCoeff();

  const Eigen::VectorXd grad_sq = grad.array().square().matrix() * weights_;
  for (int n = 0; n < modes; ++n) {
    const double lambda = frequencies_[n] * frequencies_[n];
    eigenvalue_residual_ =
        std::max(eigenvalue_residual_, std::fabs(grad_sq[n] - lambda) / lambda);
    boundary_residual_ = std::max(boundary_residual_, std::fabs(eval(n + 1, 1.0)));
  }
}

double EigenBasis::profile(int n, double r) const {
  const double z = frequencies_[n - 1];
  if (dimension_ == 3) return z * sinc(z * r);
  return bessel::j0(z * r);
}

double EigenBasis::eval(int n, double r) const {
  return norms_[n - 1] * profile(n, r);
}

double EigenBasis::eval_derivative(int n, double r) const {
  const double z = frequencies_[n - 1];
  if (dimension_ == 3) return norms_[n - 1] * z * z * sinc_derivative(z * r);
  return -norms_[n - 1] * z * bessel::j1(z * r);
}

// Complex data with members varying fastest are viewed as real matrices of
// 2B rows (re, im interleaved per member) so a batch costs one product.
void EigenBasis::synthesize_raw(const double* in, Eigen::Index rows, Eigen::Index modes,
                                double* out) const {
  if (modes > modes_) {
    throw DimensionError("synthesize: coefficient vector longer than basis");
  }
  Eigen::Map<const Eigen::MatrixXd> x(in, rows, modes);
  Eigen::Map<Eigen::MatrixXd> y(out, rows, nodes());
  y.noalias() = x * values_.topRows(modes);
}

void EigenBasis::analyze_raw(const double* in, Eigen::Index rows, double* out) const {
  Eigen::Map<const Eigen::MatrixXd> x(in, rows, nodes());
  Eigen::Map<Eigen::MatrixXd> y(out, rows, modes_);
  y.noalias() = x * weighted_;
}

GridField EigenBasis::synthesize(const Coeffs& coeffs) const {
  GridField field;
  field.basis = this;
  synthesize_into(coeffs, field.values);
  return field;
}

void EigenBasis::synthesize_into(const Coeffs& coeffs, Eigen::VectorXcd& out) const {
  if (coeffs.size() > modes_) {
    throw DimensionError("synthesize: coefficient vector longer than basis");
  }
  out.resize(nodes());
  synthesize_raw(reinterpret_cast<const double*>(coeffs.data()), 2, coeffs.size(),
                 reinterpret_cast<double*>(out.data()));
}

void EigenBasis::synthesize_real_into(const Eigen::VectorXd& coeffs,
                                      Eigen::VectorXd& out) const {
  out.resize(nodes());
  synthesize_raw(coeffs.data(), 1, coeffs.size(), out.data());
}

Coeffs EigenBasis::analyze(const GridField& field) const {
  if (field.basis != nullptr && field.basis != this) {
    throw DimensionError("analyze: field belongs to a different basis");
  }
  Coeffs out;
  analyze_into(field.values, out);
  return out;
}

void EigenBasis::analyze_into(const Eigen::VectorXcd& values, Coeffs& out) const {
  if (values.size() != nodes()) {
    throw DimensionError("analyze: grid length does not match basis node count");
  }
  out.resize(modes_);
  analyze_raw(reinterpret_cast<const double*>(values.data()), 2,
              reinterpret_cast<double*>(out.data()));
}

void EigenBasis::analyze_real_into(const Eigen::VectorXd& values,
                                   Eigen::VectorXd& out) const {
  if (values.size() != nodes()) {
    throw DimensionError("analyze: grid length does not match basis node count");
  }
  out.resize(modes_);
  analyze_raw(values.data(), 1, out.data());
}

void EigenBasis::synthesize_rows(const Eigen::MatrixXcd& coeffs, Eigen::MatrixXcd& grid) const {
  grid.resize(coeffs.rows(), nodes());
  synthesize_raw(reinterpret_cast<const double*>(coeffs.data()), 2 * coeffs.rows(),
                 coeffs.cols(), reinterpret_cast<double*>(grid.data()));
}

void EigenBasis::synthesize_rows_real(const Eigen::MatrixXd& coeffs,
                                      Eigen::MatrixXd& grid) const {
  grid.resize(coeffs.rows(), nodes());
  synthesize_raw(coeffs.data(), coeffs.rows(), coeffs.cols(), grid.data());
}

void EigenBasis::analyze_rows(const Eigen::MatrixXcd& grid, Eigen::MatrixXcd& coeffs) const {
  if (grid.cols() != nodes()) {
    throw DimensionError("analyze: grid length does not match basis node count");
  }
  coeffs.resize(grid.rows(), modes_);
  analyze_raw(reinterpret_cast<const double*>(grid.data()), 2 * grid.rows(),
              reinterpret_cast<double*>(coeffs.data()));
}

void EigenBasis::analyze_rows_real(const Eigen::MatrixXd& grid, Eigen::MatrixXd& coeffs) const {
  if (grid.cols() != nodes()) {
    throw DimensionError("analyze: grid length does not match basis node count");
  }
  coeffs.resize(grid.rows(), modes_);
  analyze_raw(grid.data(), grid.rows(), coeffs.data());
}

nlohmann::json EigenBasis::summary() const {
  return {
      {"dimension", dimension_},
      {"modes", modes_},
      {"nodes", nodes()},
      {"frequencies", std::vector<double>(frequencies_.data(),
                                          frequencies_.data() + frequencies_.size())},
      {"orthonormality_residual", orthonormality_residual_},
      {"eigenvalue_residual", eigenvalue_residual_},
      {"boundary_residual", boundary_residual_},
  };
}

EigenBasis build_basis(int dimension, int modes, int nodes) {
  EigenBasis basis(dimension, modes, nodes);
  if (!(basis.orthonormality_residual() <= kOrthonormalityTolerance)) {
    std::ostringstream msg;
    msg << "build_basis: orthonormality residual " << basis.orthonormality_residual()
        << " exceeds " << kOrthonormalityTolerance << " (d=" << dimension
        << ", N=" << modes << ", M=" << nodes << "); increase M";
    throw NumericalError(msg.str());
  }
  return basis;
}

int min_nodes(int modes, double alpha_max) {
  return std::max(2 * modes,
                  static_cast<int>(std::ceil((alpha_max + 2.0) * modes / 2.0)));
}

EigenBasis make_basis(int dimension, int modes, double alpha_max) {
  int nodes = std::max({8 * modes, kMinimumNodes, min_nodes(modes, alpha_max)});
  for (int attempt = 0; attempt < 6; ++attempt) {
    EigenBasis basis(dimension, modes, nodes);
    if (basis.orthonormality_residual() <= kOrthonormalityTolerance) return basis;
    nodes = nodes * 3 / 2;
  }
  return build_basis(dimension, modes, nodes);
}

}  // namespace ballgibbs
