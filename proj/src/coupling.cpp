#include "ballgibbs/coupling.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "ballgibbs/errors.hpp"

namespace ballgibbs {
namespace {

constexpr int kNodeCeiling = 1 << 15;

std::size_t choose(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

double quartic_on_rule(const EigenBasis& basis, const Quadruple& q, int nodes) {
  Eigen::VectorXd r, w;
  gauss_legendre(nodes, r, w);
  const double area = basis.dimension() == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
  double sum = 0;
  for (int j = 0; j < nodes; ++j) {
    double f = area * std::pow(r[j], basis.dimension() - 1) * w[j];
    for (int n : q) f *= basis.eval(n, r[j]);
    sum += f;
  }
  return sum;
}

double quartic_on_basis(const EigenBasis& basis, const Quadruple& q) {
  const Eigen::MatrixXd& e = basis.values();
  return (e.row(q[0] - 1).array() * e.row(q[1] - 1).array() * e.row(q[2] - 1).array() *
          e.row(q[3] - 1).array())
      .matrix()
      .dot(basis.weights());
}

// Pair-pair overlap matrix G[(a,b),(c,d)] = int e_a e_b e_c e_d over a <= b.
Eigen::MatrixXd pair_overlaps(const EigenBasis& basis) {
  const int n = basis.modes();
  const int pairs = n * (n + 1) / 2;
  Eigen::MatrixXd prod(pairs, basis.nodes());
  int row = 0;
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      prod.row(row++) = basis.values().row(a).cwiseProduct(basis.values().row(b));
    }
  }
  return (prod * basis.weights().asDiagonal()) * prod.transpose();
}

int pair_index(int a, int b, int n) {
  // 0-based a <= b
  return a * n - a * (a - 1) / 2 + (b - a);
}

}  // namespace

double quartic_coupling(const EigenBasis& basis, int n, int n1, int n2, int n3) {
  const Quadruple q{n, n1, n2, n3};
  double zsum = 0;
  for (int k : q) {
    if (k < 1 || k > basis.modes()) {
      throw std::invalid_argument("quartic_coupling: index outside basis range");
    }
    zsum += basis.frequency(k);
  }
  // Fastest product oscillates zsum / (2 pi) times on (0, 1); 4 nodes each.
  const int required = static_cast<int>(std::ceil(2.0 * zsum / std::numbers::pi));
  int nodes = basis.nodes();
  double coarse = 0;
  if (nodes >= required) {
    coarse = quartic_on_basis(basis, q);
  } else {
    nodes = required;
    coarse = quartic_on_rule(basis, q, nodes);
  }
  while (2 * nodes <= kNodeCeiling) {
    const double fine = quartic_on_rule(basis, q, 2 * nodes);
    if (std::fabs(fine - coarse) <= kCouplingTolerance) return fine;
    coarse = fine;
    nodes *= 2;
  }
  throw NumericalError("quartic_coupling: resolution ceiling exceeded");
}

std::size_t CouplingTensor::canonical_index(Quadruple s) {
  // Sorted multiset {a<=b<=c<=d} <-> combination {a-1 < b < c+1 < d+2}.
  return choose(s[0] - 1, 1) + choose(s[1], 2) + choose(s[2] + 1, 3) + choose(s[3] + 2, 4);
}

CouplingTensor::CouplingTensor(int dimension, int max_index)
    : dimension_(dimension), max_index_(max_index) {
  if (max_index < 1) throw std::invalid_argument("CouplingTensor: max_index must be >= 1");
  int nodes = std::max(8 * max_index, 16);
  Eigen::MatrixXd overlaps;
  for (;;) {
    const EigenBasis coarse = build_basis(dimension, max_index, nodes);
    const EigenBasis fine = build_basis(dimension, max_index, 2 * nodes);
    overlaps = pair_overlaps(fine);
    doubling_error_ = (overlaps - pair_overlaps(coarse)).cwiseAbs().maxCoeff();
    frequencies_ = fine.frequencies();
    if (doubling_error_ <= kCouplingTolerance) {
      nodes_ = 2 * nodes;
      break;
    }
    nodes *= 2;
    if (2 * nodes > kNodeCeiling) {
      throw NumericalError("CouplingTensor: resolution ceiling exceeded");
    }
  }
  const int n = max_index;
  entries_.assign(choose(static_cast<std::size_t>(n) + 3, 4), 0.0);
  for (int a = 1; a <= n; ++a) {
    for (int b = a; b <= n; ++b) {
      const int ab = pair_index(a - 1, b - 1, n);
      for (int c = b; c <= n; ++c) {
        for (int d = c; d <= n; ++d) {
          entries_[canonical_index({a, b, c, d})] = overlaps(ab, pair_index(c - 1, d - 1, n));
        }
      }
    }
  }
}

double CouplingTensor::operator()(int n, int n1, int n2, int n3) const {
  Quadruple q{n, n1, n2, n3};
  for (int k : q) {
    if (k < 1 || k > max_index_) throw std::out_of_range("CouplingTensor: index out of range");
  }
  std::sort(q.begin(), q.end());
  return entries_[canonical_index(q)];
}

CouplingBoundReport verify_coupling_bound(const CouplingTensor& tensor, int maxn) {
  if (maxn < 1 || maxn > tensor.max_index()) {
    throw std::invalid_argument("verify_coupling_bound: maxn outside tensor range");
  }
  CouplingBoundReport report;
  for (int a = 1; a <= maxn; ++a) {
    for (int b = a; b <= maxn; ++b) {
      for (int c = b; c <= maxn; ++c) {
        for (int d = c; d <= maxn; ++d) {
          const double ratio = std::fabs(tensor(a, b, c, d)) / a;
          ++report.quadruples;
          if (!std::isfinite(ratio)) {
            report.all_finite = false;
            continue;
          }
          if (ratio > report.max_ratio) {
            report.max_ratio = ratio;
            report.argmax = {a, b, c, d};
          }
        }
      }
    }
  }
  return report;
}

std::string to_string(ResonanceLabel label) {
  return label == ResonanceLabel::NearResonant ? "near-resonant" : "nonresonant";
}

int dyadic_block(int n) {
  if (n < 1) throw std::invalid_argument("dyadic_block: index must be positive");
  return static_cast<int>(std::bit_floor(static_cast<unsigned>(n)));
}

ResonanceClass classify_resonance(const Quadruple& q, double exponent,
                                  const Eigen::VectorXd* frequencies) {
  ResonanceClass rc;
  rc.quadruple = q;
  for (int i = 0; i < 4; ++i) rc.blocks[i] = dyadic_block(q[i]);
  auto sq = [](int n) { return static_cast<std::int64_t>(n) * n; };
  const std::int64_t m = sq(q[0]) - sq(q[1]) + sq(q[2]) - sq(q[3]);
  rc.modulus = m < 0 ? -m : m;
  const int base = std::min({rc.blocks[0], rc.blocks[1], rc.blocks[2] + rc.blocks[3]});
  rc.threshold = std::pow(static_cast<double>(base), exponent);
  rc.label = static_cast<double>(rc.modulus) < rc.threshold ? ResonanceLabel::NearResonant
                                                            : ResonanceLabel::Nonresonant;
  if (frequencies != nullptr) {
    const auto& z = *frequencies;
    auto zz = [&](int n) { return z[n - 1] * z[n - 1]; };
    rc.spectral_modulus = std::fabs(zz(q[0]) - zz(q[1]) + zz(q[2]) - zz(q[3]));
  }
  return rc;
}

ResonanceCensus resonance_census(const CouplingTensor& tensor, int maxn, double exponent) {
  if (maxn < 1 || maxn > tensor.max_index()) {
    throw std::invalid_argument("resonance_census: maxn outside tensor range");
  }
  ResonanceCensus census;
  census.maxn = maxn;
  census.exponent = exponent;
  for (int n = 1; n <= maxn; ++n) {
    for (int n1 = 1; n1 <= maxn; ++n1) {
      for (int n2 = 1; n2 <= maxn; ++n2) {
        for (int n3 = 1; n3 <= maxn; ++n3) {
          const ResonanceClass rc = classify_resonance({n, n1, n2, n3}, exponent);
          const int label = static_cast<int>(rc.label);
          const double c = tensor(n, n1, n2, n3);
          CensusCell& cell = census.blocks[rc.blocks];
          ++cell.count[label];
          cell.l2_mass[label] += c * c;
          ++census.total[label];
          census.total_mass[label] += c * c;
          ++census.quadruples;
        }
      }
    }
  }
  return census;
}

LogFit fit_log(const std::vector<double>& y, int first, int last) {
  if (first < 1 || last > static_cast<int>(y.size()) || last - first < 1) {
    throw std::invalid_argument("fit_log: invalid range");
  }
  const int count = last - first + 1;
  double sx = 0, sy = 0;
  for (int n = first; n <= last; ++n) {
    sx += std::log(n);
    sy += y[n - 1];
  }
  const double mx = sx / count, my = sy / count;
  double sxx = 0, sxy = 0, syy = 0;
  for (int n = first; n <= last; ++n) {
    const double dx = std::log(n) - mx, dy = y[n - 1] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  LogFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  fit.first = first;
  fit.last = last;
  return fit;
}

std::vector<double> resonant_diagonal_sums(const EigenBasis& basis, int n0, int nmax) {
  if (n0 < 1 || n0 > basis.modes() || nmax < 1 || nmax > n0) {
    throw std::invalid_argument("resonant_diagonal_sums: need 1 <= nmax <= N0 <= basis N");
  }
  const Eigen::MatrixXd sq = basis.values().topRows(n0).array().square();
  // D(n, m) = int e_n^2 e_m^2
  const Eigen::MatrixXd overlaps =
      (sq.topRows(nmax) * basis.weights().asDiagonal()) * sq.transpose();
  const Eigen::VectorXd inv_lambda =
      basis.frequencies().head(n0).array().square().inverse().matrix();
  const Eigen::VectorXd s = overlaps * inv_lambda;
  return {s.data(), s.data() + s.size()};
}

DiagonalReport resonant_diagonal_sum(const EigenBasis& basis, int n0) {
  DiagonalReport report;
  report.sums = resonant_diagonal_sums(basis, n0, n0);
  const int last = n0 / 2;
  if (last > 4) report.fit = fit_log(report.sums, 4, last);
  return report;
}

nlohmann::json to_json(const LogFit& fit) {
  return {{"a", fit.intercept},
          {"c", fit.slope},
          {"r_squared", fit.r_squared},
          {"range", {fit.first, fit.last}}};
}

std::string coupling_csv(const CouplingTensor& tensor, int maxn, double exponent) {
  std::ostringstream out;
  out.precision(17);
  out << "n,n1,n2,n3,c,modulus,label\n";
  for (int n = 1; n <= maxn; ++n) {
    for (int n1 = 1; n1 <= maxn; ++n1) {
      for (int n2 = 1; n2 <= maxn; ++n2) {
        for (int n3 = 1; n3 <= maxn; ++n3) {
          const ResonanceClass rc = classify_resonance({n, n1, n2, n3}, exponent);
          out << n << ',' << n1 << ',' << n2 << ',' << n3 << ',' << tensor(n, n1, n2, n3) << ','
              << rc.modulus << ',' << to_string(rc.label) << '\n';
        }
      }
    }
  }
  return out.str();
}

}  // namespace ballgibbs
