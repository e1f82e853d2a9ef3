#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace ballgibbs {

using Coeffs = Eigen::VectorXcd;

/// Gauss-Legendre nodes and weights on (0, 1).
void gauss_legendre(int m, Eigen::VectorXd& nodes, Eigen::VectorXd& weights);

class EigenBasis;

/// Complex samples of a radial field at the quadrature radii of a basis.
struct GridField {
  Eigen::VectorXcd values;
  const EigenBasis* basis = nullptr;
};

/// Radial Dirichlet eigenfunctions of the unit ball in dimension 2 or 3,
/// L2(B)-normalised, together with a radial Gauss-Legendre rule whose weights
/// carry the surface-area factor |S^{d-1}| r^{d-1}.
///
///   d = 3:  e_n(r) = sin(n pi r) / (sqrt(2 pi) r),        z_n = n pi
///   d = 2:  e_n(r) = J0(z_n r) / (sqrt(pi) |J1(z_n)|),    J0(z_n) = 0
///
/// Immutable once built; share freely across threads.
class EigenBasis {
 public:
  EigenBasis(int dimension, int modes, int nodes);

  int dimension() const { return dimension_; }
  int modes() const { return modes_; }
  int nodes() const { return static_cast<int>(radii_.size()); }

  /// z_1 < ... < z_N; eigenvalues of -Delta are z_n^2.
  const Eigen::VectorXd& frequencies() const { return frequencies_; }
  Eigen::VectorXd eigenvalues() const { return frequencies_.array().square(); }
  double frequency(int n) const { return frequencies_[n - 1]; }

  const Eigen::VectorXd& radii() const { return radii_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  /// values()(n-1, j) = e_n(r_j).
  const Eigen::MatrixXd& values() const { return values_; }

  /// e_n(r) and its radial derivative, evaluated analytically (1-based n).
  double eval(int n, double r) const;
  double eval_derivative(int n, double r) const;

  /// Quadrature of a real integrand given at the nodes, over the ball.
  double integrate(const Eigen::VectorXd& grid_values) const {
    return weights_.dot(grid_values);
  }

  /// values_j = sum_n coeffs_n e_n(r_j). Accepts up to modes() coefficients.
  GridField synthesize(const Coeffs& coeffs) const;
  void synthesize_into(const Coeffs& coeffs, Eigen::VectorXcd& out) const;
  void synthesize_real_into(const Eigen::VectorXd& coeffs, Eigen::VectorXd& out) const;

  /// coeffs_n = sum_j w_j e_n(r_j) values_j.
  Coeffs analyze(const GridField& field) const;
  void analyze_into(const Eigen::VectorXcd& values, Coeffs& out) const;
  void analyze_real_into(const Eigen::VectorXd& values, Eigen::VectorXd& out) const;

  /// Batched transforms: one ensemble member per row (B x n -> B x M and
  /// B x M -> B x N). A single product serves the whole batch.
  void synthesize_rows(const Eigen::MatrixXcd& coeffs, Eigen::MatrixXcd& grid) const;
  void synthesize_rows_real(const Eigen::MatrixXd& coeffs, Eigen::MatrixXd& grid) const;
  void analyze_rows(const Eigen::MatrixXcd& grid, Eigen::MatrixXcd& coeffs) const;
  void analyze_rows_real(const Eigen::MatrixXd& grid, Eigen::MatrixXd& coeffs) const;

  /// max_{n,m} |<e_n, e_m>_quad - delta_nm|.
  double orthonormality_residual() const { return orthonormality_residual_; }
  /// max_n |int |grad e_n|^2 - z_n^2| / z_n^2.
  double eigenvalue_residual() const { return eigenvalue_residual_; }
  /// max_n |e_n(1)|.
  double boundary_residual() const { return boundary_residual_; }

  nlohmann::json summary() const;

 private:
  double profile(int n, double r) const;
  void synthesize_raw(const double* in, Eigen::Index rows, Eigen::Index modes, double* out) const;
  void analyze_raw(const double* in, Eigen::Index rows, double* out) const;

  int dimension_;
  int modes_;
  Eigen::VectorXd frequencies_;
  Eigen::VectorXd norms_;  // d = 2: 1 / (sqrt(pi) |J1(z_n)|)
  Eigen::VectorXd radii_;
  Eigen::VectorXd weights_;
  Eigen::MatrixXd values_;    // N x M
  Eigen::MatrixXd weighted_;  // M x N, w_j e_n(r_j)
  double orthonormality_residual_ = 0;
  double eigenvalue_residual_ = 0;
  double boundary_residual_ = 0;
};

inline constexpr double kOrthonormalityTolerance = 1e-10;

/// Builds a basis with exactly `nodes` quadrature radii.
/// Throws std::invalid_argument on bad arguments and NumericalError when the
/// orthonormality residual exceeds kOrthonormalityTolerance.
EigenBasis build_basis(int dimension, int modes, int nodes);

/// Smallest node count admissible for nonlinearity exponents up to alpha_max.
int min_nodes(int modes, double alpha_max);

/// Node floor for very small bases, where 8N nodes under-resolve |e_n|^{a+2}.
inline constexpr int kMinimumNodes = 64;

/// Default construction: M = max(8N, 64, min_nodes), raised until the
/// orthonormality gate passes.
EigenBasis make_basis(int dimension, int modes, double alpha_max = 4.0);

}  // namespace ballgibbs
