#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ballgibbs/eigenbasis.hpp"

namespace ballgibbs {

using Quadruple = std::array<int, 4>;

/// Absolute accuracy demanded of every overlap integral.
inline constexpr double kCouplingTolerance = 1e-9;

/// c(n, n1, n2, n3) = int_B e_n e_n1 e_n2 e_n3 dx by radial quadrature.
/// Uses the basis rule when it has at least 4 nodes per oscillation of the
/// fastest product, a finer Gauss-Legendre rule otherwise; the value is
/// confirmed by node doubling. Throws NumericalError past the node ceiling.
double quartic_coupling(const EigenBasis& basis, int n, int n1, int n2, int n3);

/// Fully symmetric table of quartic overlaps for indices 1..max_index.
/// Only sorted representatives a <= b <= c <= d are stored.
class CouplingTensor {
 public:
  CouplingTensor(int dimension, int max_index);

  int dimension() const { return dimension_; }
  int max_index() const { return max_index_; }
  double operator()(int n, int n1, int n2, int n3) const;
  std::size_t stored_entries() const { return entries_.size(); }
  /// Quadrature nodes used and the node-doubling discrepancy observed.
  int nodes() const { return nodes_; }
  double doubling_error() const { return doubling_error_; }
  const Eigen::VectorXd& frequencies() const { return frequencies_; }

  /// Rank of a sorted quadruple among all sorted quadruples (colex order).
  static std::size_t canonical_index(Quadruple sorted);

 private:
  int dimension_;
  int max_index_;
  int nodes_ = 0;
  double doubling_error_ = 0;
  Eigen::VectorXd frequencies_;
  std::vector<double> entries_;
};

struct CouplingBoundReport {
  double max_ratio = 0;       // empirical C = max |c| / min(indices)
  Quadruple argmax{1, 1, 1, 1};
  std::size_t quadruples = 0;  // sorted quadruples examined
  bool all_finite = true;
};

CouplingBoundReport verify_coupling_bound(const CouplingTensor& tensor, int maxn);

enum class ResonanceLabel { Nonresonant, NearResonant };
std::string to_string(ResonanceLabel label);

struct ResonanceClass {
  Quadruple quadruple{};
  Quadruple blocks{};            // dyadic blocks 2^floor(log2 n)
  std::int64_t modulus = 0;      // |n^2 - n1^2 + n2^2 - n3^2|
  double threshold = 0;          // min(N, N1, N2 + N3)^exponent
  double spectral_modulus = -1;  // |z_n^2 - z_n1^2 + z_n2^2 - z_n3^2| when frequencies given
  ResonanceLabel label = ResonanceLabel::Nonresonant;
};

inline constexpr double kResonanceExponent = 0.01;

int dyadic_block(int n);

/// near-resonant iff modulus < min(N, N1, N2 + N3)^exponent.
ResonanceClass classify_resonance(const Quadruple& q, double exponent = kResonanceExponent,
                                  const Eigen::VectorXd* frequencies = nullptr);

struct CensusCell {
  std::uint64_t count[2] = {0, 0};  // indexed by ResonanceLabel
  double l2_mass[2] = {0, 0};       // sum of c^2
};

struct ResonanceCensus {
  int maxn = 0;
  double exponent = kResonanceExponent;
  std::map<Quadruple, CensusCell> blocks;  // keyed by (N, N1, N2, N3)
  std::uint64_t total[2] = {0, 0};
  double total_mass[2] = {0, 0};
  std::uint64_t quadruples = 0;  // ordered quadruples visited
};

/// Classifies every ordered quadruple in [1, maxn]^4.
ResonanceCensus resonance_census(const CouplingTensor& tensor, int maxn,
                                 double exponent = kResonanceExponent);

struct LogFit {
  double intercept = 0;
  double slope = 0;
  double r_squared = 0;
  int first = 0;
  int last = 0;
};

/// Least squares y ~ a + c log n over n in [first, last] (1-based into y).
LogFit fit_log(const std::vector<double>& y, int first, int last);

/// S(n) = sum_{m <= N0} z_m^{-2} int e_n^2 e_m^2 for n = 1..nmax.
/// Requires N0 <= basis.modes() and nmax <= N0.
std::vector<double> resonant_diagonal_sums(const EigenBasis& basis, int n0, int nmax);

struct DiagonalReport {
  std::vector<double> sums;  // S(1..nmax)
  LogFit fit;                // over n in [4, N0/2]
};

DiagonalReport resonant_diagonal_sum(const EigenBasis& basis, int n0);

nlohmann::json to_json(const LogFit& fit);
/// CSV rows n,n1,n2,n3,c,modulus,label for every ordered quadruple <= maxn.
std::string coupling_csv(const CouplingTensor& tensor, int maxn,
                         double exponent = kResonanceExponent);

}  // namespace ballgibbs
