#pragma once

// Bessel functions of the first kind, orders 0 and 1, and the positive zeros
// of J0. Self-contained: ascending series (extended precision) below the seam,
// Hankel asymptotic expansion above it.

namespace ballgibbs::bessel {

/// Argument at which evaluation switches from the power series to the
/// asymptotic expansion. Both agree to ~1e-15 here.
inline constexpr double kSeam = 15.0;

double j0(double x);
double j1(double x);

double j0_series(double x);
double j1_series(double x);
double j0_asymptotic(double x);
double j1_asymptotic(double x);

/// n-th positive zero of J0 (n >= 1). Bracketed in ((n - 1/2) pi, n pi) and
/// polished by safeguarded Newton iteration; |J0(z)| <= 1e-13 on return.
double j0_zero(int n);

}  // namespace ballgibbs::bessel
