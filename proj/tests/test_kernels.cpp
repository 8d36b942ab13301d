#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "semiwave/kernel.hpp"

using namespace semiwave;
using Catch::Approx;

namespace {

double quad_mgf(const Kernel& k, double lambda, double a, double b) {
    return static_cast<double>(oracle::simpson(
        [&](long double y) {
            return k.density(static_cast<double>(y)) * std::exp(-lambda * static_cast<double>(y));
        },
        a, b, 40000));
}

}  // namespace

TEST_CASE("gaussian transform and tails match erfc references") {
    Kernel k = Kernel::gaussian(-5.0, 2.0);
    for (double lam : {-1.2, -0.3, 0.0, 0.5, 1.7}) {
        double closed = k.mgf(lam);
        double byquad = quad_mgf(k, lam, -5.0 - 18.0, -5.0 + 18.0);
        REQUIRE(closed == Approx(byquad).epsilon(1e-10));
        REQUIRE(closed == Approx(static_cast<double>(oracle::gauss_mgf(-5.0L, 2.0L, 1.0L, lam))));
    }
    for (double a : {-8.0, -5.0, -3.5, 0.0}) {
        REQUIRE(k.tail_mass(a, Side::right) ==
                Approx(static_cast<double>(oracle::gauss_tail_right(-5.0L, 2.0L, 1.0L, a))).margin(1e-14));
        REQUIRE(k.tail_mass(a, Side::left) ==
                Approx(static_cast<double>(oracle::gauss_tail_left(-5.0L, 2.0L, 1.0L, a))).margin(1e-14));
    }
    REQUIRE(k.tail_mass(-5.0, Side::right) == Approx(0.5));
    REQUIRE(k.tail_quantile(0.5, Side::right) == Approx(-5.0).margin(1e-10));
    REQUIRE_THROWS_AS(k.tail_quantile(0.0, Side::right), std::domain_error);
}

TEST_CASE("uniform kernel is exact arithmetic") {
    Kernel k = Kernel::uniform(-1.0, 3.0, 2.0);
    REQUIRE(k.mass() == 2.0);
    REQUIRE(k.density(0.0) == Approx(0.5));
    REQUIRE(k.density(3.5) == 0.0);
    for (double lam : {-0.9, 0.0, 1e-14, 2.3}) {
        REQUIRE(k.mgf(lam) == Approx(quad_mgf(k, lam, -1.0, 3.0)).epsilon(1e-11));
    }
    REQUIRE(k.tail_mass(1.0, Side::right) == Approx(1.0));
    REQUIRE(k.tail_mass(-2.0, Side::right) == Approx(2.0));
    REQUIRE(k.tail_quantile(0.0, Side::right) == Approx(3.0));
    REQUIRE(k.tail_quantile(0.0, Side::left) == Approx(-1.0));
    REQUIRE(k.tail_quantile(0.5, Side::right) == Approx(2.0).margin(1e-10));
}

TEST_CASE("laplace kernel enforces its admissibility window") {
    Kernel k = Kernel::laplace(1.0, 0.5);
    for (double lam : {-1.8, 0.0, 1.3}) {
        // split at the density kink; the weighted tail decays slowly near the
        // admissibility boundary, hence the wide window
        double byquad = quad_mgf(k, lam, 1.0 - 150.0, 1.0) + quad_mgf(k, lam, 1.0, 1.0 + 150.0);
        REQUIRE(k.mgf(lam) == Approx(byquad).epsilon(1e-9));
    }
    REQUIRE_THROWS_AS(k.mgf(2.0), std::domain_error);
    REQUIRE_THROWS_AS(k.mgf(-2.0), std::domain_error);
    auto [lo, hi] = k.admissible_window(0);
    REQUIRE(lo == Approx(-2.0));
    REQUIRE(hi == Approx(2.0));
    REQUIRE(k.tail_mass(1.0, Side::right) == Approx(0.5));
    REQUIRE(k.tail_mass(2.0, Side::right) == Approx(0.5 * std::exp(-2.0)));
}

TEST_CASE("tabulated kernel reproduces the density it sampled") {
    // tabulate a gaussian(0.5, 0.8) on a wide window and compare transforms
    Kernel ref = Kernel::gaussian(0.5, 0.8);
    double lo = 0.5 - 14.0, hi = 0.5 + 14.0, dx = 0.01;
    std::vector<double> dens;
    for (double y = lo; y <= hi + 1e-12; y += dx) dens.push_back(ref.density(y));
    Kernel tab = Kernel::tabulated(lo, dx, dens);
    for (double lam : {-1.0, 0.0, 0.8}) {
        REQUIRE(tab.mgf(lam) == Approx(ref.mgf(lam)).epsilon(1e-4));
    }
    REQUIRE(tab.tail_mass(1.2, Side::right) ==
            Approx(static_cast<double>(oracle::gauss_tail_right(0.5L, 0.8L, 1.0L, 1.2L))).margin(3e-5));
    // spacing too coarse for steep weights
    REQUIRE_THROWS_AS(tab.mgf(51.0), std::domain_error);
}

TEST_CASE("weighted transform magnitude matches direct complex quadrature") {
    Kernel g = Kernel::gaussian(-2.0, 1.5);
    for (double lam : {0.0, 0.7}) {
        for (double zeta : {0.0, 0.5, 3.0}) {
            double mine = g.weighted_fourier_magnitude(lam, zeta);
            double ref = static_cast<double>(
                             oracle::weighted_transform_mag([&](long double y) { return g.density(static_cast<double>(y)); },
                                                            lam, zeta, -2.0L - 18.0L, -2.0L + 18.0L)) /
                         (2.0 * pi);
            REQUIRE(mine == Approx(ref).margin(1e-9));
        }
    }
    // zeta = 0 recovers the real transform
    REQUIRE(g.weighted_fourier_magnitude(0.4, 0.0) * 2.0 * pi == Approx(g.mgf(0.4)));

    Kernel u = Kernel::uniform(-1.0, 1.0);
    double mine = u.weighted_fourier_magnitude(0.3, 2.0);
    double ref = static_cast<double>(oracle::weighted_transform_mag(
                     [&](long double y) { return u.density(static_cast<double>(y)); }, 0.3L, 2.0L,
                     -1.0L, 1.0L)) /
                 (2.0 * pi);
    REQUIRE(mine == Approx(ref).margin(1e-10));
}

TEST_CASE("reflection flips tails and transposes the transform") {
    Kernel k = Kernel::gaussian(-5.0, 2.0);
    Kernel r = k.reflected();
    REQUIRE(r.mgf(0.7) == Approx(k.mgf(-0.7)));
    REQUIRE(r.tail_mass(2.0, Side::right) == Approx(k.tail_mass(-2.0, Side::left)));

    Kernel u = Kernel::uniform(-1.0, 3.0).reflected();
    REQUIRE(u.density(-2.0) == Approx(0.25));
    REQUIRE(u.density(2.0) == 0.0);
}

TEST_CASE("spatial rescaling dilates the transform argument") {
    Kernel k = Kernel::laplace(0.4, 0.3);
    double f = std::sqrt(2.0);
    Kernel r = k.rescaled_space(f);
    REQUIRE(r.mass() == Approx(k.mass()));
    for (double lam : {-1.0, 0.2, 1.5}) {
        REQUIRE(r.mgf(lam) == Approx(k.mgf(lam * f)).epsilon(1e-12));
    }
    // density transforms as K(w/f)/f
    REQUIRE(r.density(1.0) == Approx(k.density(1.0 / f) / f));
}

TEST_CASE("tensor kernels multiply per-axis transforms") {
    Kernel t = Kernel::tensor_product({Kernel::gaussian(-5.0, 2.0), Kernel::gaussian(0.0, 1.0)});
    REQUIRE(t.dim() == 2);
    Vec2 lam{0.5, -0.2};
    REQUIRE(t.mgf(lam, 2) == Approx(t.factor(0).mgf(0.5) * t.factor(1).mgf(-0.2)));
    Vec2 zeta{1.0, 2.0};
    REQUIRE(t.weighted_fourier_magnitude(lam, zeta, 2) ==
            Approx(t.factor(0).weighted_fourier_magnitude(0.5, 1.0) *
                   t.factor(1).weighted_fourier_magnitude(-0.2, 2.0)));
    REQUIRE(t.density2(-5.0, 0.0) == Approx(t.factor(0).density(-5.0) * t.factor(1).density(0.0)));
}

TEST_CASE("grid sampling renormalizes to exact discrete mass") {
    Kernel k = Kernel::gaussian(1.0, 0.5, 1.3);
    Axis ax = Axis::from_extent(1.0 - 8.0, 1.0 + 8.0, 0.05);
    auto s = sample(k, ax);
    double sum = 0;
    for (double v : s.values) sum += v;
    REQUIRE(sum * ax.dx == Approx(1.3).margin(1e-13));
    REQUIRE(std::abs(s.renorm - 1.0) < 1e-4);

    // window that visibly truncates the mass must be rejected
    Axis tight = Axis::from_extent(0.0, 2.0, 0.05);
    REQUIRE_THROWS_AS(sample(k, tight), std::runtime_error);
    auto loose = sample(k, tight, 1e-8, false);
    REQUIRE(loose.tail_outside > 1e-3);

    Grid g2 = Grid::plane(-6.0, 6.0, 0.1, Edge::fill(0.0), Edge::fill(0.0), -6.0, 6.0, 0.1,
                          Edge::fill(0.0), Edge::fill(0.0));
    Kernel t = Kernel::tensor_product({Kernel::gaussian(0.0, 1.0), Kernel::gaussian(0.0, 1.0)});
    Field f = sample_on_grid(t, g2);
    double total = 0;
    for (double v : f.v) total += v;
    REQUIRE(total * 0.1 * 0.1 == Approx(1.0).margin(1e-12));
}

TEST_CASE("support interval and quantile are mutually inverse") {
    Kernel k = Kernel::gaussian(-1.0, 3.0);
    auto [lo, hi] = k.support_interval(1e-6);
    REQUIRE(k.tail_mass(hi, Side::right) == Approx(1e-6).epsilon(1e-6));
    REQUIRE(k.tail_mass(lo, Side::left) == Approx(1e-6).epsilon(1e-6));
    for (double tau : {0.3, 0.05, 1e-4}) {
        double x = k.tail_quantile(tau, Side::right);
        REQUIRE(k.tail_mass(x, Side::right) == Approx(tau).epsilon(1e-9));
    }
}

TEST_CASE("kernel constructors validate their inputs") {
    REQUIRE_THROWS_AS(Kernel::gaussian(0.0, -1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(Kernel::uniform(2.0, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(Kernel::laplace(0.0, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(Kernel::gaussian(0.0, 1.0, -2.0), std::invalid_argument);
    // tabulated: trapezoid integral must agree with the declared mass
    std::vector<double> bad = {0.0, 1.0, 0.0};
    REQUIRE_THROWS_AS(Kernel::tabulated(-1.0, 1.0, bad, 5.0), std::invalid_argument);
    std::vector<double> neg = {0.0, -1.0, 0.0};
    REQUIRE_THROWS_AS(Kernel::tabulated(-1.0, 1.0, neg, 1.0), std::invalid_argument);
}

TEST_CASE("log transform agrees with the direct transform and survives big exponents") {
    std::vector<Kernel> ks = {Kernel::gaussian(-1.5, 2.0, 0.7), Kernel::uniform(-2.0, 0.5, 1.3),
                              Kernel::laplace(1.0, 0.4)};
    {
        Kernel g = Kernel::gaussian(0.0, 1.0);
        Axis ax = g.support_interval(1e-12).first < -8.0 ? Axis::from_extent(-8.0, 8.0, 0.01)
                                                         : Axis::from_extent(-8.0, 8.0, 0.01);
        std::vector<double> dens(static_cast<std::size_t>(ax.n));
        for (int i = 0; i < ax.n; ++i) dens[static_cast<std::size_t>(i)] = g.density(ax.coord(i));
        ks.push_back(Kernel::tabulated(ax.lo, ax.dx, dens, 1.0));
    }
    for (const Kernel& k : ks) {
        for (double lam : {-1.7, -0.3, 0.0, 0.9, 2.1}) {
            if (k.form() == Kernel::Form::laplace && std::abs(lam) * 0.4 >= 1.0) continue;
            REQUIRE(k.log_mgf(lam) == Approx(std::log(k.mgf(lam))).margin(1e-11));
        }
    }
    // exponent range where the direct product formula would overflow
    Kernel g = Kernel::gaussian(-5.0, 2.0);
    REQUIRE(g.log_mgf(100.0) == Approx(100.0 * 5.0 + 0.5 * 1e4 * 2.0));
    REQUIRE(std::isfinite(g.log_mgf(100.0)));
    // compact support: growth is linear in lambda, never overflows
    Kernel u = Kernel::uniform(-1.0, 1.0);
    REQUIRE(u.log_mgf(400.0) == Approx(std::log(std::exp(1.0) / 800.0) + 399.0).epsilon(1e-6));

    Kernel t = Kernel::tensor_product({Kernel::gaussian(0.0, 1.0), Kernel::uniform(-1.0, 1.0)});
    REQUIRE(t.log_mgf(Vec2{0.5, 0.25}, 2) ==
            Approx(Kernel::gaussian(0.0, 1.0).log_mgf(0.5) +
                   Kernel::uniform(-1.0, 1.0).log_mgf(0.25))
                .margin(1e-13));
}
