#include <cmath>
#include <initializer_list>
#include <numbers>
#include <random>
#include <set>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <doctest.h>

#include "ballgibbs/coupling.hpp"
#include "ballgibbs/dynamics.hpp"
#include "ballgibbs/measures.hpp"

using namespace ballgibbs;
using std::numbers::pi;

namespace {

// Si(x) by fixed 30-point Gauss rules on [k pi, (k+1) pi].
double sine_integral(double x) {
  using boost::math::quadrature::gauss;
  const auto sinc = [](double t) { return t == 0 ? 1.0 : std::sin(t) / t; };
  double sum = 0;
  double a = 0;
  while (a < x) {
    const double b = std::min(x, a + pi);
    sum += gauss<double, 30>::integrate(sinc, a, b);
    a = b;
  }
  return sum;
}

// d = 3 overlap reduced to one dimension. sin a sin b sin c sin d is
// (1/8) sum s1 s2 s3 cos(a + s1 b + s2 c + s3 d) over signs s_i, the signed
// sum of ones vanishes, and int_0^1 (1 - cos K r) / r^2 dr = K Si(K) + cos K - 1.
double reduced_coupling(int n, int n1, int n2, int n3) {
  double sum = 0;
  for (int s1 : {-1, 1}) {
    for (int s2 : {-1, 1}) {
      for (int s3 : {-1, 1}) {
        const double sign = s1 * s2 * s3;
        const double k = std::fabs(pi * (n + s1 * n1 + s2 * n2 + s3 * n3));
        sum += sign * (k * sine_integral(k) + std::cos(k) - 1.0);
      }
    }
  }
  return -sum / (8.0 * pi);
}

double adaptive_c1111() {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
             [](double r) { return std::pow(std::sin(pi * r), 4) / (r * r); }, 0.0, 1.0, 20, 1e-15) /
         pi;
}

}  // namespace

TEST_CASE("c(1,1,1,1) against adaptive quadrature") {
  const EigenBasis basis = make_basis(3, 4);
  CHECK(std::fabs(quartic_coupling(basis, 1, 1, 1, 1) - adaptive_c1111()) <= 1e-12);
  const CouplingTensor tensor(3, 4);
  CHECK(std::fabs(tensor(1, 1, 1, 1) - adaptive_c1111()) <= 1e-12);
}

TEST_CASE("reduced one-dimensional formula on random quadruples") {
  const EigenBasis basis = make_basis(3, 32);
  CHECK(std::fabs(reduced_coupling(1, 1, 1, 1) - adaptive_c1111()) <= 1e-12);
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> index(1, 32);
  for (int trial = 0; trial < 10; ++trial) {
    const int a = index(rng), b = index(rng), c = index(rng), d = index(rng);
    CHECK(std::fabs(quartic_coupling(basis, a, b, c, d) - reduced_coupling(a, b, c, d)) <= 1e-9);
  }
}

TEST_CASE("permutation symmetry") {
  const EigenBasis basis = make_basis(3, 16);
  const double c = quartic_coupling(basis, 1, 2, 3, 4);
  CHECK(std::fabs(c - quartic_coupling(basis, 4, 3, 2, 1)) <= 1e-13);
  const CouplingTensor tensor(2, 12);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> index(1, 12);
  const EigenBasis b2 = make_basis(2, 12);
  for (int trial = 0; trial < 20; ++trial) {
    std::array<int, 4> q{index(rng), index(rng), index(rng), index(rng)};
    const double direct = quartic_coupling(b2, q[0], q[1], q[2], q[3]);
    std::sort(q.begin(), q.end());
    do {
      CHECK(std::fabs(tensor(q[0], q[1], q[2], q[3]) - direct) <= 1e-9);
      CHECK(std::fabs(quartic_coupling(b2, q[0], q[1], q[2], q[3]) - direct) <= 1e-9);
    } while (std::next_permutation(q.begin(), q.end()));
  }
}

TEST_CASE("canonical index is a bijection onto sorted quadruples") {
  std::set<std::size_t> seen;
  const int n = 9;
  for (int a = 1; a <= n; ++a) {
    for (int b = a; b <= n; ++b) {
      for (int c = b; c <= n; ++c) {
        for (int d = c; d <= n; ++d) seen.insert(CouplingTensor::canonical_index({a, b, c, d}));
      }
    }
  }
  const std::size_t count = static_cast<std::size_t>(n) * (n + 1) * (n + 2) * (n + 3) / 24;
  CHECK(seen.size() == count);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == count - 1);
  const CouplingTensor tensor(3, 32);
  CHECK(tensor.stored_entries() == 32u * 33 * 34 * 35 / 24);
  CHECK(tensor.doubling_error() <= kCouplingTolerance);
}

TEST_CASE("coupling bound sweep") {
  const CouplingTensor tensor(3, 32);
  const CouplingBoundReport one = verify_coupling_bound(tensor, 1);
  CHECK(one.max_ratio == doctest::Approx(std::fabs(tensor(1, 1, 1, 1))).epsilon(1e-15));
  CHECK(one.quadruples == 1);
  const CouplingBoundReport c16 = verify_coupling_bound(tensor, 16);
  const CouplingBoundReport c32 = verify_coupling_bound(tensor, 32);
  CHECK(c16.all_finite);
  CHECK(c32.all_finite);
  CHECK(std::isfinite(c32.max_ratio));
  CHECK(c32.max_ratio > 0);
  CHECK(c32.max_ratio / c16.max_ratio >= 0.9);
  CHECK(c32.max_ratio / c16.max_ratio <= 1.1);
  CHECK_THROWS(verify_coupling_bound(tensor, 33));
}

TEST_CASE("resonance classification") {
  const ResonanceClass exact = classify_resonance({5, 5, 3, 3});
  CHECK(exact.modulus == 0);
  CHECK(exact.label == ResonanceLabel::NearResonant);
  const ResonanceClass off = classify_resonance({3, 2, 2, 1});
  CHECK(off.modulus == 8);
  CHECK(off.threshold == doctest::Approx(std::pow(2.0, 0.01)));
  CHECK(off.threshold == doctest::Approx(1.007).epsilon(1e-3));
  CHECK(off.label == ResonanceLabel::Nonresonant);
  CHECK(off.blocks == Quadruple{2, 2, 2, 1});
  for (int n = 1; n <= 40; ++n) {
    for (int m = 1; m <= 40; m += 3) {
      CHECK(classify_resonance({n, n, m, m}).label == ResonanceLabel::NearResonant);
    }
  }
  CHECK(dyadic_block(1) == 1);
  CHECK(dyadic_block(7) == 4);
  CHECK(dyadic_block(8) == 8);
  CHECK(dyadic_block(255) == 128);
  const Eigen::VectorXd z = make_basis(2, 8).frequencies();
  const ResonanceClass spectral = classify_resonance({3, 2, 2, 1}, kResonanceExponent, &z);
  CHECK(spectral.spectral_modulus ==
        doctest::Approx(std::fabs(z[2] * z[2] - z[1] * z[1] + z[1] * z[1] - z[0] * z[0])));
  CHECK(classify_resonance({3, 2, 2, 1}, 5.0).label == ResonanceLabel::NearResonant);
}

TEST_CASE("census partitions every ordered quadruple") {
  const CouplingTensor tensor(3, 12);
  const ResonanceCensus census = resonance_census(tensor, 12);
  CHECK(census.quadruples == 12u * 12 * 12 * 12);
  CHECK(census.total[0] + census.total[1] == census.quadruples);
  std::uint64_t cells = 0;
  for (const auto& [key, cell] : census.blocks) cells += cell.count[0] + cell.count[1];
  CHECK(cells == census.quadruples);
  // Pair-matched quadruples (n, n, m, m) and (n, m, m, n) are near-resonant.
  CHECK(census.total[1] >= 2u * 12 * 12 - 12);
}

TEST_CASE("tensor expansion of the cubic term matches the grid computation") {
  const EigenBasis basis = make_basis(3, 8);
  const CouplingTensor tensor(3, 8);
  const Coeffs u = sample_free(basis, 17) * 4.0;
  const Coeffs grid = nls_rhs(basis, u, 2.0) + std::complex<double>(0, 1) *
                      basis.eigenvalues().cast<std::complex<double>>().cwiseProduct(u);
  for (int n = 1; n <= 8; ++n) {
    std::complex<double> sum = 0;
    for (int a = 1; a <= 8; ++a) {
      for (int b = 1; b <= 8; ++b) {
        for (int c = 1; c <= 8; ++c) sum += tensor(n, a, b, c) * u[a - 1] * std::conj(u[b - 1]) * u[c - 1];
      }
    }
    CHECK(std::abs(grid[n - 1] - std::complex<double>(0, -1) * sum) <= 1e-8);
  }
}

TEST_CASE("resonant diagonal sums") {
  const EigenBasis basis = make_basis(3, 128);
  const std::vector<double> one = resonant_diagonal_sums(basis, 1, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == doctest::Approx(adaptive_c1111() / (pi * pi)).epsilon(1e-10));
  const std::vector<double> s = resonant_diagonal_sums(basis, 128, 64);
  for (std::size_t n = 1; n < s.size(); ++n) CHECK(s[n] > s[n - 1]);
}

TEST_CASE("log fit") {
  std::vector<double> y;
  for (int n = 1; n <= 64; ++n) y.push_back(0.3 + 0.07 * std::log(n));
  const LogFit fit = fit_log(y, 4, 32);
  CHECK(fit.intercept == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(fit.slope == doctest::Approx(0.07).epsilon(1e-12));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  const auto j = to_json(fit);
  CHECK(j["a"] == doctest::Approx(0.3));
  CHECK(j["c"] == doctest::Approx(0.07));
  CHECK(j.contains("r_squared"));
  CHECK(j["range"][0] == 4);
  CHECK(j["range"][1] == 32);
}

TEST_CASE("coupling table export") {
  const CouplingTensor tensor(3, 3);
  const std::string csv = coupling_csv(tensor, 3);
  CHECK(csv.rfind("n,n1,n2,n3,c,modulus,label\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 81);
  CHECK(csv.find("near-resonant") != std::string::npos);
}
