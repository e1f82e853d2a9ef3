#include "ballgibbs/bessel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "ballgibbs/errors.hpp"

namespace ballgibbs::bessel {
namespace {

long double series(int order, long double x) {
  const long double q = x * x / 4;
  long double term = order == 0 ? 1.0L : x / 2;
  long double sum = term;
  for (int k = 1; k < 400; ++k) {
    term *= -q / (static_cast<long double>(k) * (k + order));
    sum += term;
    if (std::fabs(term) < 1e-24L * (1.0L + std::fabs(sum))) break;
  }
  return sum;
}

// J_nu(x) ~ sqrt(2/(pi x)) (P cos chi - Q sin chi), chi = x - (nu/2 + 1/4) pi.
// The expansion is divergent; summation stops at the smallest term.
double asymptotic(int order, double xd) {
  const long double x = xd;
  const long double mu = 4.0L * order * order;
  long double p = 0, q = 0;
  long double a = 1;  // a_k(nu) / x^k
  long double last = INFINITY;
  for (int k = 0; k < 200; ++k) {
    const long double mag = std::fabs(a);
    if (mag > last) break;
    last = mag;
    if (k % 2 == 0) {
      p += ((k / 2) % 2 ? -a : a);
    } else {
      q += (((k - 1) / 2) % 2 ? -a : a);
    }
    if (mag < 1e-22L) break;
    a *= (mu - (2.0L * k + 1) * (2.0L * k + 1)) / ((k + 1) * 8.0L * x);
  }
  // cos/sin of x - pi/4 and x - 3pi/4 written without subtracting multiples of pi.
  const long double c = std::cos(x), s = std::sin(x);
  const long double r2 = std::numbers::sqrt2_v<long double> / 2;
  long double cos_chi, sin_chi;
  if (order == 0) {
    cos_chi = r2 * (c + s);
    sin_chi = r2 * (s - c);
  } else {
    cos_chi = r2 * (s - c);
    sin_chi = -r2 * (c + s);
  }
  const long double amp = std::sqrt(2.0L / (std::numbers::pi_v<long double> * x));
  return static_cast<double>(amp * (p * cos_chi - q * sin_chi));
}

}  // namespace

double j0_series(double x) { return static_cast<double>(series(0, x)); }
double j1_series(double x) { return static_cast<double>(series(1, x)); }
double j0_asymptotic(double x) { return asymptotic(0, std::fabs(x)); }
double j1_asymptotic(double x) {
  return x < 0 ? -asymptotic(1, -x) : asymptotic(1, x);
}

double j0(double x) {
  const double ax = std::fabs(x);
  return ax <= kSeam ? j0_series(ax) : j0_asymptotic(ax);
}

double j1(double x) {
  return std::fabs(x) <= kSeam ? j1_series(x) : j1_asymptotic(x);
}

double j0_zero(int n) {
  if (n < 1) throw std::invalid_argument("j0_zero: index must be >= 1");
  constexpr double pi = std::numbers::pi;
  double lo = (n - 0.5) * pi;
  double hi = n * pi;
  double flo = j0(lo);
  if (flo * j0(hi) > 0) {
    throw NumericalError("j0_zero: bracket failure for n=" + std::to_string(n));
  }
  // McMahon start, then Newton (J0' = -J1) with bisection fallback.
  const double beta = (n - 0.25) * pi;
  double z = beta + 1.0 / (8.0 * beta);
  if (!(z > lo && z < hi)) z = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    const double f = j0(z);
    if (f == 0.0) return z;
    if ((f > 0) == (flo > 0)) {
      lo = z;
      flo = f;
    } else {
      hi = z;
    }
    double next = z + f / j1(z);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - z) <= 1e-15 * z) {
      z = next;
      break;
    }
    z = next;
  }
  if (std::fabs(j0(z)) > 1e-13) {
    throw NumericalError("j0_zero: root-find did not converge for n=" +
                         std::to_string(n));
  }
  return z;
}

}  // namespace ballgibbs::bessel
