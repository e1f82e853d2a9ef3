#include <cmath>
#include <initializer_list>
#include <numbers>

#include <doctest.h>

#include "ballgibbs/bessel.hpp"

using namespace ballgibbs;
using std::numbers::pi;

namespace {

// Reference zero by plain bisection of the standard library J0.
double bisect_j0_zero(int n) {
  double lo = (n - 0.5) * pi, hi = n * pi;
  double flo = std::cyl_bessel_j(0.0, lo);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fmid = std::cyl_bessel_j(0.0, mid);
    if ((fmid < 0) == (flo < 0)) {
      lo = mid;
      flo = fmid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("j0 and j1 agree with the standard library") {
  for (double x = 0.0; x <= 80.0; x += 0.173) {
    CHECK(std::fabs(bessel::j1(x) - std::cyl_bessel_j(1.0, x)) <= 2e-14);
    CHECK(std::fabs(bessel::j0(x) - std::cyl_bessel_j(0.0, x)) <= 2e-14);
  }
}

TEST_CASE("series and asymptotic branches meet at the seam") {
  for (double x : {bessel::kSeam - 1e-9, bessel::kSeam, bessel::kSeam + 1e-9}) {
    CHECK(std::fabs(bessel::j0_series(x) - bessel::j0_asymptotic(x)) <= 1e-12);
    CHECK(std::fabs(bessel::j1_series(x) - bessel::j1_asymptotic(x)) <= 1e-12);
  }
}

TEST_CASE("first zeros of j0") {
  CHECK(std::fabs(bessel::j0_zero(1) - 2.404825557695773) <= 1e-14);
  CHECK(std::fabs(bessel::j0_zero(2) - 5.520078110286311) <= 1e-14);
  CHECK(std::fabs(bessel::j0_zero(20) - 19.75 * pi) < 0.01);
}

TEST_CASE("zeros match a bisection oracle, vanish and increase") {
  double previous = 0;
  for (int n = 1; n <= 300; ++n) {
    const double z = bessel::j0_zero(n);
    CHECK(std::fabs(z - bisect_j0_zero(n)) <= 1e-12 * z);
    CHECK(std::fabs(bessel::j0(z)) <= 1e-13);
    // McMahon: z_n = beta + 1/(8 beta) - O(beta^-3), beta = (n - 1/4) pi.
    const double beta = (n - 0.25) * pi;
    CHECK(z > beta);
    CHECK(z < beta + 1.0 / (8 * beta));
    CHECK(z > previous);
    previous = z;
  }
}
