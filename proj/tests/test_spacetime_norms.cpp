#include <cmath>
#include <initializer_list>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <doctest.h>

#include "ballgibbs/measures.hpp"
#include "ballgibbs/spacetime_norms.hpp"

using namespace ballgibbs;
using std::numbers::pi;
using cd = std::complex<double>;

namespace {

Trajectory make_trajectory(std::shared_ptr<const EigenBasis> basis, Model model,
                           const std::vector<double>& times,
                           const std::function<Coeffs(double)>& state) {
  Trajectory t;
  t.basis = basis;
  t.config.model = model;
  t.times = times;
  for (double x : times) t.states.push_back(state(x));
  return t;
}

Trajectory linear_mode(std::shared_ptr<const EigenBasis> basis, int n, double horizon, int samples,
                       Model model = Model::NLS) {
  const double omega = dispersion(*basis, model)[n - 1];
  return make_trajectory(basis, model, uniform_times(0, horizon, samples - 1), [&](double t) {
    Coeffs c = Coeffs::Zero(basis->modes());
    c[n - 1] = std::polar(1.0, -omega * t);
    return c;
  });
}

Trajectory random_trajectory(std::shared_ptr<const EigenBasis> basis, int modes, unsigned seed,
                             const std::vector<double>& times) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  return make_trajectory(basis, Model::NLS, times, [&](double) {
    Coeffs c(modes);
    for (auto& x : c) x = {g(rng), g(rng)};
    return c;
  });
}

}  // namespace

TEST_CASE("Sobolev norms") {
  const EigenBasis basis = make_basis(3, 64);
  const Coeffs c = sample_free(basis, 3);
  CHECK(sobolev_norm(basis, c, 0.0) == doctest::Approx(std::sqrt(mass(c))).epsilon(1e-14));
  Coeffs two = Coeffs::Zero(64);
  two[1] = 1.0;
  CHECK(sobolev_norm(basis, two, 1.0) == doctest::Approx(2 * pi).epsilon(1e-14));
  double previous = 0;
  for (double s = -1.0; s <= 2.0; s += 0.25) {
    const double v = sobolev_norm(basis, c, s);
    CHECK(v > previous);
    previous = v;
  }
  CHECK_THROWS(sobolev_norm(Eigen::VectorXd::Ones(3), c, 0.0));
}

TEST_CASE("free H^s mean matches the partial sum") {
  const EigenBasis basis = make_basis(3, 64);
  std::vector<double> x;
  for (int i = 0; i < 3000; ++i) x.push_back(std::pow(sobolev_norm(basis, sample_free(basis, sample_seed(99, i)), 0.25), 2));
  double m = 0, v = 0;
  for (double xi : x) m += xi;
  m /= x.size();
  for (double xi : x) v += (xi - m) * (xi - m);
  const double se = std::sqrt(v / (x.size() - 1) / x.size());
  const double expected = free_sobolev_mean(basis.frequencies(), 64, 0.25);
  double direct = 0;
  for (int n = 1; n <= 64; ++n) direct += std::pow(n * pi, -1.5);
  CHECK(expected == doctest::Approx(direct).epsilon(1e-13));
  CHECK(std::fabs(m - expected) <= 3 * se);
  // Variance of a sum of independent exponentials with means z^{2s-2}.
  CHECK(v / (x.size() - 1) == doctest::Approx(free_sobolev_variance(basis.frequencies(), 64, 0.25)).epsilon(0.15));
}

TEST_CASE("norm parameters and window") {
  CHECK_NOTHROW(validate(NormParams{0.4, 0.7, 3.9, 8}));
  CHECK_THROWS(validate(NormParams{0.4, 0.7, 0.5, 8}));
  CHECK_THROWS(validate(NormParams{NAN, 0.7, 2, 2}));
  CHECK(tukey(0.5, 0.25) == 1.0);
  CHECK(tukey(0.0, 0.25) == 0.0);
  CHECK(tukey(1.2, 0.25) == 0.0);
  CHECK(tukey(0.0625, 0.25) == doctest::Approx(0.5));
  CHECK(tukey(0.3, 0.0) == 1.0);
  CHECK(tukey(0.25, 1.0) == doctest::Approx(0.5));
}

TEST_CASE("time-frequency transform") {
  auto basis = std::make_shared<const EigenBasis>(make_basis(3, 4));
  SUBCASE("grid") {
    const Trajectory t = linear_mode(basis, 1, 1.0, 257);
    const SpaceTimeCoefficients stc = time_frequency_transform(t);
    const int length = static_cast<int>(stc.offsets.size());
    CHECK(length % 2 == 1);
    CHECK(length >= 4 * 257);
    CHECK(stc.frequency_step() == doctest::Approx(2 * pi / (length * t.times[1])).epsilon(1e-12));
    CHECK(stc.cycle_step() == doctest::Approx(stc.frequency_step() / (2 * pi)).epsilon(1e-12));
    for (int j = 0; j < length; ++j) CHECK(stc.offsets[j] == doctest::Approx(-stc.offsets[length - 1 - j]).scale(1));
    CHECK(stc.offsets[(length - 1) / 2] == 0.0);
  }
  SUBCASE("zero trajectory") {
    const Trajectory t = make_trajectory(basis, Model::NLS, uniform_times(0, 1, 99),
                                         [&](double) { return Coeffs::Zero(4); });
    CHECK(time_frequency_transform(t).amplitudes.norm() == 0.0);
  }
  SUBCASE("Parseval") {
    const Trajectory t = random_trajectory(basis, 4, 8, uniform_times(0, 1, 127));
    const SpaceTimeCoefficients stc = time_frequency_transform(t);
    const Eigen::VectorXd energy = windowed_mode_energy(t);
    for (int n = 0; n < 4; ++n) {
      CHECK(stc.amplitudes.row(n).squaredNorm() * stc.cycle_step() ==
            doctest::Approx(energy[n]).epsilon(1e-8));
    }
  }
  SUBCASE("a linear mode concentrates at its dispersion frequency") {
    for (Model model : {Model::NLS, Model::NLW}) {
      const double horizon = 2.0;
      const Trajectory t = linear_mode(basis, 2, horizon, 512, model);
      const SpaceTimeCoefficients stc = time_frequency_transform(t);
      const double bin = 2 * pi / horizon;
      double inside = 0, total = 0;
      for (Eigen::Index j = 0; j < stc.offsets.size(); ++j) {
        const double p = std::norm(stc.amplitudes(1, j));
        total += p;
        if (std::fabs(stc.offsets[j]) <= 4 * bin) inside += p;
      }
      CHECK(1.0 - inside / total < 0.01);
      Eigen::Index peak;
      stc.amplitudes.row(1).cwiseAbs().maxCoeff(&peak);
      CHECK(stc.offsets[peak] == 0.0);
      CHECK(stc.amplitudes.row(0).norm() == 0.0);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS(time_frequency_transform(linear_mode(basis, 1, 1.0, 32)));
    std::vector<double> times = uniform_times(0, 1, 99);
    times[50] += 1e-4;
    const Trajectory uneven = make_trajectory(basis, Model::NLS, times, [](double) { return Coeffs::Ones(4); });
    CHECK_THROWS_AS(time_frequency_transform(uneven), std::invalid_argument);
  }
}

TEST_CASE("X^{s,b} proxy") {
  auto basis = std::make_shared<const EigenBasis>(make_basis(3, 8));
  SUBCASE("b = 0 is the windowed Sobolev integral") {
    const Trajectory t = random_trajectory(basis, 8, 4, uniform_times(0, 1, 255));
    const SpaceTimeCoefficients stc = time_frequency_transform(t);
    for (double s : {0.0, 0.4, 1.0}) {
      CHECK(xsb_norm(stc, s, 0.0) == doctest::Approx(windowed_sobolev_integral(t, s)).epsilon(0.01));
    }
  }
  SUBCASE("rectangular window gives the plain time integral") {
    const Trajectory t = random_trajectory(basis, 8, 5, uniform_times(0, 1, 255));
    const SpaceTimeCoefficients stc = time_frequency_transform(t, 0.0);
    double integral = 0;
    const double dt = t.times[1];
    for (const Coeffs& c : t.states) integral += dt * std::pow(sobolev_norm(basis->frequencies(), c, 0.4) / std::pow(pi, 0.4), 2);
    CHECK(xsb_norm(stc, 0.4, 0.0) == doctest::Approx(std::sqrt(integral)).epsilon(0.01));
  }
  SUBCASE("a linear mode is nearly b independent") {
    const double horizon = 200.0;
    const Trajectory t = linear_mode(basis, 3, horizon, 1024);
    const SpaceTimeCoefficients stc = time_frequency_transform(t);
    const double base = xsb_norm(stc, 0.4, 0.0);
    const double window = std::sqrt(windowed_mode_energy(t)[2]);
    CHECK(base == doctest::Approx(std::pow(3.0, 0.4) * window).epsilon(1e-8));
    for (double b : {0.25, 0.5, 0.7, 1.0}) CHECK(xsb_norm(stc, 0.4, b) == doctest::Approx(base).epsilon(0.05));
  }
  SUBCASE("monotone in b") {
    const Trajectory t = random_trajectory(basis, 8, 6, uniform_times(0, 1, 127));
    const SpaceTimeCoefficients stc = time_frequency_transform(t);
    CHECK(xsb_norm(stc, 0.4, 0.7) > xsb_norm(stc, 0.4, 0.3));
    CHECK_THROWS(xsb_norm(stc, 0.4, -0.1));
  }
}

TEST_CASE("mixed norms") {
  auto basis = std::make_shared<const EigenBasis>(make_basis(3, 8));
  SUBCASE("p = q = 2, s = 0 is the space-time L2 norm") {
    const Trajectory t = random_trajectory(basis, 8, 2, uniform_times(0, 0.7, 40));
    double integral = 0;
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
      integral += 0.5 * (t.times[k + 1] - t.times[k]) * (mass(t.states[k]) + mass(t.states[k + 1]));
    }
    const double m = mixed_norm(*basis, t, 0.0, 2.0, 2.0);
    CHECK(m * m == doctest::Approx(integral).epsilon(1e-8));
  }
  SUBCASE("static field separates") {
    const double horizon = 0.6, p = 3.9, q = 8.0;
    const Trajectory t = make_trajectory(basis, Model::NLS, uniform_times(0, horizon, 10), [](double) {
      Coeffs c = Coeffs::Zero(8);
      c[0] = 1.0;
      return c;
    });
    const double lp = std::pow(boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                                   [&](double r) {
                                     return 4 * pi * r * r *
                                            std::pow(std::fabs(std::sin(pi * r) / (std::sqrt(2 * pi) * r)), p);
                                   },
                                   0.0, 1.0, 20, 1e-14),
                               1.0 / p);
    CHECK(mixed_norm(*basis, t, 0.0, p, q) == doctest::Approx(std::pow(horizon, 1.0 / q) * lp).epsilon(1e-9));
    CHECK(mixed_norm(*basis, t, 1.0, p, q) == doctest::Approx(pi * std::pow(horizon, 1.0 / q) * lp).epsilon(1e-9));
  }
  SUBCASE("invalid exponents") {
    const Trajectory t = random_trajectory(basis, 8, 2, uniform_times(0, 1, 4));
    CHECK_THROWS(mixed_norm(*basis, t, 0.0, 0.5, 2.0));
  }
}

TEST_CASE("linear deviation") {
  auto basis = std::make_shared<const EigenBasis>(make_basis(3, 8));
  const Trajectory zero = make_trajectory(basis, Model::NLW, uniform_times(0, 1, 8),
                                          [](double) { return Coeffs::Zero(8); });
  CHECK(linear_deviation(*basis, zero, {Coeffs::Zero(8), Model::NLW, 0.0}, 1.2) == 0.0);
  const Coeffs phi = sample_free(*basis, 1);
  const Trajectory free = make_trajectory(basis, Model::NLW, uniform_times(0, 1, 8), [&](double t) {
    return linear_flow(*basis, phi, t, Model::NLW);
  });
  CHECK(linear_deviation(*basis, free, {phi, Model::NLW, 0.0}, 1.2) < 1e-13);
  CHECK_THROWS_AS(linear_deviation(*basis, free, {2.0 * phi, Model::NLW, 0.0}, 1.2), std::invalid_argument);
}

TEST_CASE("trajectory distance is a metric") {
  auto small = std::make_shared<const EigenBasis>(make_basis(3, 4));
  auto large = std::make_shared<const EigenBasis>(make_basis(3, 8));
  const auto times = uniform_times(0, 1, 6);
  const Trajectory a = random_trajectory(small, 4, 1, times);
  const Trajectory b = random_trajectory(large, 8, 2, times);
  const Trajectory c = random_trajectory(large, 8, 3, times);
  CHECK(trajectory_distance(a, a, 0.4) == 0.0);
  CHECK(trajectory_distance(a, b, 0.4) == trajectory_distance(b, a, 0.4));
  for (double s : {0.0, 0.4, 1.0}) {
    CHECK(trajectory_distance(a, c, s) <= trajectory_distance(a, b, s) + trajectory_distance(b, c, s));
    CHECK(trajectory_distance(b, c, s) <= trajectory_distance(b, a, s) + trajectory_distance(a, c, s));
  }
  // Zero padding: only the modes beyond the shorter trajectory differ.
  Trajectory padded = b;
  double tail = 0;
  for (std::size_t k = 0; k < padded.size(); ++k) {
    padded.states[k].head(4) = a.states[k];
    Coeffs rest = padded.states[k];
    rest.head(4).setZero();
    tail = std::max(tail, sobolev_norm(large->frequencies(), rest, 0.4));
  }
  CHECK(tail > 0);
  CHECK(trajectory_distance(a, padded, 0.4) == doctest::Approx(tail).epsilon(1e-14));
  const Trajectory shifted = random_trajectory(large, 8, 2, uniform_times(0, 2, 6));
  CHECK_THROWS(trajectory_distance(b, shifted, 0.4));
  auto disk = std::make_shared<const EigenBasis>(make_basis(2, 8));
  CHECK_THROWS(trajectory_distance(b, random_trajectory(disk, 8, 2, times), 0.4));
}

TEST_CASE("norm rows") {
  const std::string csv = norm_csv({{"xsb", 5, 16, 0.4, "b=0.7", 1.25}});
  CHECK(csv == "experiment,seed,N,s,parameter,value\nxsb,5,16,0.40000000000000002,b=0.7,1.25\n");
}
