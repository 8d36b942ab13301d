#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "oracles.hpp"
#include "semiwave/fft.hpp"
#include "semiwave/grid.hpp"
#include "semiwave/numerics.hpp"

using namespace semiwave;
using Catch::Approx;

TEST_CASE("bisection finds roots of increasing maps") {
    double r = bisect([](double x) { return x * x * x - 2.0; }, 0.0, 2.0, {1e-14, 0.0, 200});
    REQUIRE(std::abs(r - std::cbrt(2.0)) < 1e-13);

    auto [lo, hi] = widen_increasing([](double x) { return std::exp(x) - 100.0; }, -1.0, 1.0);
    REQUIRE(std::exp(lo) < 100.0);
    REQUIRE(std::exp(hi) > 100.0);
}

TEST_CASE("golden section locates a smooth minimum") {
    double x = golden_min([](double t) { return (t - 1.3) * (t - 1.3) + 0.7; }, -4.0, 6.0);
    REQUIRE(std::abs(x - 1.3) < 1e-7);
}

TEST_CASE("adaptive quadrature matches fixed-step reference") {
    auto f = [](double x) { return std::exp(-x * x); };
    double mine = integrate(f, -3.0, 5.0, 1e-13);
    long double ref = oracle::simpson([](long double x) { return std::exp(-x * x); }, -3.0L, 5.0L, 20000);
    REQUIRE(std::abs(mine - static_cast<double>(ref)) < 1e-11);

    // right tail of a unit gaussian density from 1.5
    double tail = integrate_tail(
        [](double x) { return std::exp(-x * x / 2.0) / std::sqrt(2.0 * pi); }, 1.5, +1, 1e-13);
    long double erfc_ref = oracle::gauss_tail_right(0.0L, 1.0L, 1.0L, 1.5L);
    REQUIRE(std::abs(tail - static_cast<double>(erfc_ref)) < 1e-11);
}

TEST_CASE("cubic interpolation reproduces quadratics and clamps outside") {
    std::vector<double> vals;
    double lo = -2.0, dx = 0.25;
    auto poly = [](double x) { return 3.0 + 0.5 * x - 1.25 * x * x; };
    for (int i = 0; i <= 24; ++i) vals.push_back(poly(lo + dx * i));
    // interior cells only: the first and last cell degrade to one-sided slopes
    for (double x : {-1.61, -0.113, 0.9901, 3.2}) {
        REQUIRE(interp_cubic(vals, lo, dx, x) == Approx(poly(x)).margin(1e-12));
    }
    REQUIRE(interp_cubic(vals, lo, dx, -5.0) == Approx(vals.front()));
    REQUIRE(interp_cubic(vals, lo, dx, 9.0) == Approx(vals.back()));
}

TEST_CASE("dense solve inverts a small system") {
    std::vector<double> A = {2, 1, 0, 1, 3, 1, 0, 1, 4};  // row-major
    std::vector<double> x_true = {1.0, -2.0, 0.5};
    std::vector<double> b(3, 0.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            b[static_cast<std::size_t>(i)] += A[static_cast<std::size_t>(3 * i + j)] * x_true[static_cast<std::size_t>(j)];
    auto x = solve_dense(A, b);
    for (int i = 0; i < 3; ++i)
        REQUIRE(x[static_cast<std::size_t>(i)] == Approx(x_true[static_cast<std::size_t>(i)]).margin(1e-12));
}

TEST_CASE("fft roundtrip and convolution theorem") {
    FftPlan plan(64);
    std::vector<cplx> a(64);
    for (int i = 0; i < 64; ++i) a[static_cast<std::size_t>(i)] = {std::sin(0.37 * i), std::cos(1.1 * i)};
    auto b = a;
    plan.forward(b);
    plan.inverse(b);
    for (int i = 0; i < 64; ++i) REQUIRE(std::abs(b[static_cast<std::size_t>(i)] - a[static_cast<std::size_t>(i)]) < 1e-12);

    // circular convolution of x with taps t via the product of spectra
    std::vector<double> x = {1, 2, 0, -1, 3, 0.5, -2, 1};
    std::vector<double> t = {0.5, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0, 0.25};
    std::vector<cplx> fx(x.begin(), x.end()), ft(t.begin(), t.end());
    FftPlan p8(8);
    p8.forward(fx);
    p8.forward(ft);
    for (int i = 0; i < 8; ++i) fx[static_cast<std::size_t>(i)] *= ft[static_cast<std::size_t>(i)];
    p8.inverse(fx);
    for (int i = 0; i < 8; ++i) {
        double direct = 0.0;
        for (int j = 0; j < 8; ++j) direct += t[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>((i - j + 16) % 8)];
        REQUIRE(fx[static_cast<std::size_t>(i)].real() == Approx(direct).margin(1e-12));
        REQUIRE(std::abs(fx[static_cast<std::size_t>(i)].imag()) < 1e-12);
    }
}

TEST_CASE("hashing and shortest-round-trip formatting") {
    REQUIRE(fnv1a64("", 0) == 14695981039346656037ULL);
    const char one = 'a';
    REQUIRE(fnv1a64(&one, 1) == 0xaf63dc4c8601ec8cULL);

    for (double v : {0.1, 1.0 / 3.0, 2.000000000000001, -7.25e-200, 123456789.123456789}) {
        REQUIRE(std::stod(fmt_double(v)) == v);
    }
}

TEST_CASE("axes enforce divisibility and fields index in axis-0 order") {
    Axis ax = Axis::from_extent(-2.0, 3.0, 0.25);
    REQUIRE(ax.n == 21);  // node count, not cell count
    REQUIRE(ax.coord(0) == Approx(-2.0));
    REQUIRE(ax.hi() == Approx(3.0));
    REQUIRE_THROWS_AS(Axis::from_extent(0.0, 1.0, 0.3), std::invalid_argument);

    Grid g = Grid::plane(0.0, 3.0, 1.0, Edge::fill(0.0), Edge::fill(0.0), 0.0, 2.0, 1.0,
                         Edge::replicate(), Edge::replicate());
    REQUIRE(g.size() == 12u);
    REQUIRE(g.index(2, 1) == 4u + 2u);

    Field f(g);
    f.at(2, 1) = -5.0;
    REQUIRE(f.sup_abs() == 5.0);
    REQUIRE(f.min_value() == -5.0);
}

TEST_CASE("delay history slots span exactly one delay") {
    Grid g = Grid::line(0.0, 3.5, 0.5, Edge::fill(0.0), Edge::fill(0.0));
    auto hist = DelayHistory::from_function(g, 2.0, 4, [](double s, double z, double) {
        return s + z;  // slot value encodes its own time stamp
    });
    REQUIRE(hist.slots.size() == 5u);
    REQUIRE(hist.dt == Approx(0.5));
    // slot k holds time (k - steps) * dt: slot 0 is t = -h, last is t = 0
    REQUIRE(hist.slots.front().v[0] == Approx(-2.0 + 0.0));
    REQUIRE(hist.slots.back().v[3] == Approx(0.0 + 1.5));
}
