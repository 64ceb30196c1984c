// Trigonometric approximation: plane-wave Fourier coefficients, degree-L
// approximants, and the Gamma tensor.
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "tvdoa/trig.hpp"

using namespace tvdoa;
using Catch::Approx;

namespace {

// Sup of |poly - steering| on a dense grid.
double approx_sup_error(const TrigPoly& p, const Vec2& d, int grid = 4096) {
  double sup = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double w = two_pi * i / grid;
    sup = std::max(sup, std::abs(p.eval(w) - steering(d, w)));
  }
  return sup;
}

}  // namespace

TEST_CASE("plane-wave Fourier coefficients match quadrature", "[trig]") {
  SECTION("closed form vs 4096-node quadrature, |d| <= 4, |n| <= 30") {
    const double radii[] = {0.3, 1.0, 2.0, 3.3, 4.0};
    const double angles[] = {0.0, 0.7, 2.5, -1.2};
    for (double r : radii)
      for (double a : angles) {
        const Vec2 d{r * std::cos(a), r * std::sin(a)};
        const Eigen::VectorXcd c = plane_wave_fourier_coeffs(d, 30);
        for (int n = -30; n <= 30; ++n) {
          const cplx oracle = detail::fourier_coeff_quadrature(d, n);
          INFO("r=" << r << " a=" << a << " n=" << n);
          CHECK(std::abs(c(n + 30) - oracle) < 1e-10);
        }
      }
  }
  SECTION("zero lag: delta at n = 0") {
    const Eigen::VectorXcd c = plane_wave_fourier_coeffs(Vec2{0, 0}, 10);
    for (int n = -10; n <= 10; ++n)
      CHECK(std::abs(c(n + 10) - (n == 0 ? 1.0 : 0.0)) < 1e-15);
  }
  SECTION("n=0 coefficient of a radius-2 lag is J_0(2)") {
    const Eigen::VectorXcd c = plane_wave_fourier_coeffs(Vec2{2, 0}, 5);
    CHECK(c(5).real() == Approx(0.2238907791412357).margin(1e-12));
    CHECK(std::abs(c(5).imag()) < 1e-15);
  }
  SECTION("signed-order reflection J_{-n} = (-1)^n J_n") {
    CHECK(detail::bessel_j(-3, 2.5) == Approx(-detail::bessel_j(3, 2.5)));
    CHECK(detail::bessel_j(-4, 2.5) == Approx(detail::bessel_j(4, 2.5)));
    CHECK(detail::bessel_j(3, -2.5) == Approx(-detail::bessel_j(3, 2.5)));
  }
  SECTION("super-exponential tail: |n|=20 at radius 2 below 1e-10") {
    const Eigen::VectorXcd c = plane_wave_fourier_coeffs(Vec2{0, 2}, 20);
    CHECK(std::abs(c(0)) < 1e-10);
    CHECK(std::abs(c(40)) < 1e-10);
  }
  SECTION("large-lag fallback agrees with the Bessel closed form") {
    const Vec2 d{35.0 * std::cos(0.4), 35.0 * std::sin(0.4)};
    const Eigen::VectorXcd c = plane_wave_fourier_coeffs(d, 5);  // quadrature
    const double psi = std::atan2(d.y(), d.x());
    for (int n = -5; n <= 5; ++n) {
      const cplx closed = std::polar(1.0, n * pi / 2.0) *
                          detail::bessel_j(n, d.norm()) *
                          std::polar(1.0, -n * psi);
      CHECK(std::abs(c(n + 5) - closed) < 1e-8);
    }
  }
  SECTION("Parseval: coefficient energy of the unit-modulus response is 1") {
    for (double r : {0.5, 2.0, 4.0}) {
      const Eigen::VectorXcd c =
          plane_wave_fourier_coeffs(Vec2{r * 0.6, r * 0.8}, 60);
      CHECK(c.squaredNorm() == Approx(1.0).margin(1e-12));
    }
  }
}

TEST_CASE("trig polynomial container", "[trig]") {
  SECTION("eval agrees with an explicit sum") {
    TrigPoly p(2);
    p.set_coeff(0, {1.0, 0.0});
    p.set_coeff(1, {0.5, -0.25});
    p.set_coeff(-2, {0.0, 1.0});
    for (double w : {0.0, 0.4, -2.2, 3.1}) {
      const cplx ref = cplx(1.0, 0.0) +
                       cplx(0.5, -0.25) * std::polar(1.0, w) +
                       cplx(0.0, 1.0) * std::polar(1.0, -2.0 * w);
      CHECK(std::abs(p.eval(w) - ref) < 1e-14);
    }
  }
  SECTION("conjugate-reflective detection") {
    TrigPoly p(1);
    p.set_coeff(0, {2.0, 0.0});
    p.set_coeff(1, {0.3, 0.4});
    p.set_coeff(-1, {0.3, -0.4});
    CHECK(p.conjugate_reflective());
    p.set_coeff(-1, {0.3, 0.4});
    CHECK_FALSE(p.conjugate_reflective());
  }
}

TEST_CASE("degree-L approximants of the lag response", "[trig]") {
  SECTION("zero lag gives the constant-one polynomial") {
    const TrigPoly p = build_rho(Vec2{0, 0}, 8, ApproxMode::truncated);
    for (double w : {0.0, 1.0, -2.5}) CHECK(std::abs(p.eval(w) - 1.0) < 1e-14);
  }
  SECTION("degree below one rejected") {
    REQUIRE_THROWS_MATCHES(
        build_rho(Vec2{1, 0}, 0, ApproxMode::truncated), Error,
        Catch::Matchers::Predicate<Error>(
            [](const Error& e) { return e.code() == "invalid-degree"; }));
  }
  SECTION("truncated L=20 at radius 2: sup error below 1e-9") {
    const Vec2 d{2.0 * std::cos(1.1), 2.0 * std::sin(1.1)};
    const TrigPoly p = build_rho(d, 20, ApproxMode::truncated);
    CHECK(approx_sup_error(p, d) < 1e-9);
  }
  SECTION("cesaro weights trade accuracy for positivity: larger sup error") {
    const Vec2 d{2.0 * std::cos(1.1), 2.0 * std::sin(1.1)};
    const double trunc =
        approx_sup_error(build_rho(d, 20, ApproxMode::truncated), d);
    const double ces = approx_sup_error(build_rho(d, 20, ApproxMode::cesaro), d);
    CHECK(ces > 100.0 * trunc);
    CHECK(ces < 1.0);  // still a sane approximation
  }
}

TEST_CASE("gamma tensor assembly", "[trig]") {
  SECTION("zero-lag columns are the constant polynomial") {
    std::vector<Vec2> pos = {{0.0, 0.0}, {0.7, -0.2}};
    const GammaTensor g = build_gamma(make_custom(pos), 6);
    for (int k = 0; k < 2; ++k) {
      const Eigen::VectorXcd col = g.G.col(g.pair_index(k, k));
      for (int n = -6; n <= 6; ++n)
        CHECK(std::abs(col(n + 6) - (n == 0 ? 1.0 : 0.0)) < 1e-15);
    }
  }
  SECTION("swapped pair gives the conjugate-reflected column") {
    const GammaTensor g = build_gamma(make_circular(5, 1.0), 10);
    const Eigen::VectorXcd a = g.G.col(g.pair_index(1, 2));
    const Eigen::VectorXcd b = g.G.col(g.pair_index(2, 1));
    for (int n = -10; n <= 10; ++n)
      CHECK(std::abs(a(n + 10) - std::conj(b(-n + 10))) < 1e-14);
  }
  SECTION("every column matches the quadrature oracle (m=5, L=12)") {
    const ArrayDesign d = make_circular(5, 1.0);
    const GammaTensor g = build_gamma(d, 12);
    for (int k = 0; k < 5; ++k)
      for (int l = 0; l < 5; ++l) {
        const Vec2 lag = d.positions[size_t(k)] - d.positions[size_t(l)];
        const Eigen::VectorXcd col = g.G.col(g.pair_index(k, l));
        for (int n = -12; n <= 12; ++n) {
          const cplx oracle = detail::fourier_coeff_quadrature(lag, n);
          CHECK(std::abs(col(n + 12) - oracle) < 1e-10);
        }
      }
  }
}

TEST_CASE("gamma tensor application", "[trig]") {
  const ArrayDesign d = make_circular(8, 1.0);
  const GammaTensor g = build_gamma(d, 20);

  SECTION("dimension mismatch rejected") {
    REQUIRE_THROWS_MATCHES(
        apply_gamma(g, CovMatrix::Zero(3, 3)), Error,
        Catch::Matchers::Predicate<Error>([](const Error& e) {
          return e.code() == "dimension-mismatch";
        }));
  }
  SECTION("zero matrix maps to the zero polynomial") {
    const TrigPoly q = apply_gamma(g, CovMatrix::Zero(8, 8));
    CHECK(q.coeffs.norm() == 0.0);
  }
  SECTION("single unit entry at a zero lag gives the constant one") {
    CovMatrix p = CovMatrix::Zero(8, 8);
    p(3, 3) = 1.0;
    const TrigPoly q = apply_gamma(g, p);
    for (double w : {0.0, 0.9, -2.0}) CHECK(std::abs(q.eval(w) - 1.0) < 1e-13);
  }
  SECTION("hermitian input yields a real-valued polynomial") {
    Rng rng(99);
    CovMatrix p(8, 8);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) p(i, j) = cplx(rng.normal(), rng.normal());
    p = ((p + p.adjoint().eval()) / 2.0).eval();
    const TrigPoly q = apply_gamma(g, p);
    CHECK(q.conjugate_reflective(1e-12));
    for (int i = 0; i < 64; ++i)
      CHECK(std::abs(q.eval(two_pi * i / 64).imag()) < 1e-10);
  }
  SECTION("conjugate-linear in the matrix argument") {
    Rng rng(7);
    CovMatrix p1(8, 8), p2(8, 8);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        p1(i, j) = cplx(rng.normal(), rng.normal());
        p2(i, j) = cplx(rng.normal(), rng.normal());
      }
    const cplx alpha{0.3, -1.1};
    const TrigPoly qa = apply_gamma(g, (alpha * p1 + p2).eval());
    const Eigen::VectorXcd expect = std::conj(alpha) *
                                        apply_gamma(g, p1).coeffs +
                                    apply_gamma(g, p2).coeffs;
    CHECK((qa.coeffs - expect).norm() < 1e-12);
  }
  SECTION("steering outer product peaks at its own angle with value m^2") {
    const double theta0 = 0.83;
    const Eigen::VectorXcd a = steering_vector(d, theta0);
    const CovMatrix p = a * a.adjoint();
    const TrigPoly q = apply_gamma(g, p);
    CHECK(q.eval(theta0).real() == Approx(64.0).epsilon(1e-6));
    for (int i = 0; i < 512; ++i)
      CHECK(q.eval(two_pi * i / 512).real() <= 64.0 + 1e-3);
  }
}

TEST_CASE("approximate forward operator", "[trig]") {
  const ArrayDesign d = make_circular(8, 1.0);

  SECTION("single spike reproduces the lag-response matrix") {
    const GammaTensor g = build_gamma(d, 10);
    SpikeMeasure mu;
    mu.spikes.push_back({0.6, cplx(1.0, 0.0)});
    const CovMatrix b = gamma_forward(g, mu);
    for (int k = 0; k < 8; ++k)
      for (int l = 0; l < 8; ++l) {
        const TrigPoly rho =
            build_rho(d.positions[size_t(k)] - d.positions[size_t(l)], 10,
                      ApproxMode::truncated);
        CHECK(std::abs(b(k, l) - rho.eval(0.6)) < 1e-13);
      }
  }
  SECTION("empty measure maps to zero and has zero gap") {
    const GammaTensor g = build_gamma(d, 10);
    const SpikeMeasure mu;
    CHECK(gamma_forward(g, mu).norm() == 0.0);
    CHECK(approx_operator_gap(d, g, mu) == 0.0);
  }
  SECTION("gap collapses at high degree, stays O(1) at degree one") {
    SpikeMeasure mu;
    mu.spikes.push_back({0.4, cplx(1.0, 0.0)});
    mu.spikes.push_back({-1.7, cplx(0.8, 0.0)});
    mu.spikes.push_back({2.9, cplx(0.3, 0.0)});
    CHECK(approx_operator_gap(d, build_gamma(d, 40), mu) < 1e-8);
    CHECK(approx_operator_gap(d, build_gamma(d, 1), mu) > 1e-3);
  }
}
