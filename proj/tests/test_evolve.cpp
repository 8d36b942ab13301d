#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include <semiwave/birth_law.hpp>
#include <semiwave/evolve.hpp>
#include <semiwave/spectral.hpp>

#include "oracles.hpp"

using namespace semiwave;
using Catch::Approx;

namespace {

FrameSpec gauss_frame(double c, double h = 1.0, double s2 = 1.0) {
    return FrameSpec::line(c, h, Kernel::gaussian(0.0, s2), 2.0, 2.0);
}

DelayHistory const_hist(const Field& f, double h, int steps) {
    return DelayHistory::constant_in_time(f, h, steps);
}

}  // namespace

TEST_CASE("taps sample the drift-translated density and keep the total mass") {
    Kernel k = Kernel::gaussian(0.3, 0.8);
    double dz = 0.05, shift = 0.7;
    TapSet t = make_taps(k, shift, dz);
    REQUIRE(t.sum() == Approx(1.0).margin(1e-12));
    // interior weights track the translated density within the renormalization
    for (int m : {-10, 0, 7, 23}) {
        REQUIRE(m >= t.m_lo);
        REQUIRE(m <= t.m_hi());
        double w = t.w[static_cast<std::size_t>(m - t.m_lo)];
        REQUIRE(w == Approx(k.density(m * dz - shift) * dz).epsilon(1e-6));
    }

    // compact support: offsets cover exactly the shifted box plus one guard cell
    TapSet u = make_taps(Kernel::uniform(-1.0, 1.0), 1.0, 0.25);
    REQUIRE(u.sum() == Approx(1.0).margin(1e-12));
    REQUIRE(u.m_lo * 0.25 <= 0.0);
    REQUIRE(u.m_hi() * 0.25 >= 2.0);
}

TEST_CASE("fft convolution equals the direct sum with extension embedded") {
    std::mt19937 rng(12345);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    Grid g = Grid::line(0.0, 6.3, 0.1, Edge::fill(0.4), Edge::replicate());
    FrameSpec fs = gauss_frame(0.9);
    Convolver direct(g, fs, 0.0, false);
    Convolver fast(g, fs, 0.0, true);
    Field x(g);
    for (double& v : x.v) v = U(rng);
    Field a(g), b(g);
    direct.apply(x, a, {0.4, 0.0}, {0.0, 0.0});
    fast.apply(x, b, {0.4, 0.0}, {0.0, 0.0});
    for (std::size_t i = 0; i < a.v.size(); ++i)
        REQUIRE(a.v[i] == Approx(b.v[i]).margin(1e-12));

    // a constant field with matching fills convolves to mass * constant
    Field c(g, 0.4);
    direct.apply(c, a, {0.4, 0.0}, {0.4, 0.0});
    for (double v : a.v) REQUIRE(v == Approx(0.4).margin(1e-13));
}

TEST_CASE("weight twist multiplies taps by the node exponential") {
    Grid g = Grid::line(0.0, 4.0, 0.1, Edge::fill(0.0), Edge::fill(0.0));
    FrameSpec fs = gauss_frame(0.5);
    Convolver plain(g, fs, 0.0, false);
    Convolver tw(g, fs, 0.3, false);
    const TapSet& p = plain.taps(0);
    const TapSet& q = tw.taps(0);
    REQUIRE(p.m_lo == q.m_lo);
    REQUIRE(p.w.size() == q.w.size());
    for (std::size_t j = 0; j < p.w.size(); ++j) {
        int m = p.m_lo + static_cast<int>(j);
        REQUIRE(q.w[j] == Approx(p.w[j] * std::exp(-0.3 * m * 0.1)).margin(1e-14));
    }
}

TEST_CASE("both equilibria persist to rounding over many delay periods") {
    BirthLaw law = BirthLaw::nicholson(2.0);
    LawReport rep = analyze(law);
    FrameSpec fs = FrameSpec::line(0.8, 1.0, Kernel::gaussian(0.0, 1.0), rep.gprime0,
                                   rep.lipschitz);
    for (double level : {rep.kappa, 0.0}) {
        Grid g = Grid::line(-8.0, 8.0, 0.2, Edge::fill(level), Edge::fill(level));
        Field f(g, level);
        EvolveOptions opt;
        opt.dt = 0.05;
        Evolution ev(g, fs, [&](double x) { return law(x); }, const_hist(f, 1.0, 20), opt);
        ev.run(10 * ev.steps_per_delay());
        double err = 0.0;
        for (double v : ev.state().v) err = std::max(err, std::abs(v - level));
        REQUIRE(err < 1e-10);
    }
}

TEST_CASE("nonnegative data stays nonnegative under the step-size bound") {
    BirthLaw law = BirthLaw::nicholson(2.0);
    Grid g = Grid::line(-6.0, 6.0, 0.1, Edge::fill(0.0), Edge::fill(0.0));
    Field f(g);
    for (int i = 0; i < g.ax[0].n; ++i) {
        double z = g.ax[0].coord(i);
        f.at(i) = std::max(0.0, 0.5 * std::cos(3.0 * z)) * std::exp(-z * z);
    }
    EvolveOptions opt;
    opt.dt = 0.005;  // within dz^2/2 = 0.005
    FrameSpec fs = FrameSpec::line(1.0, 1.0, Kernel::gaussian(0.0, 0.5), 2.0, 2.0);
    Evolution ev(g, fs, [&](double x) { return law(x); }, const_hist(f, 1.0, 200), opt);
    ev.run(150);
    REQUIRE(ev.state().min_value() >= 0.0);
}

TEST_CASE("ordered initial data stays ordered under a monotone law") {
    BirthLaw law = BirthLaw::nicholson(2.0);  // increasing below its peak
    Grid g = Grid::line(-5.0, 5.0, 0.25, Edge::fill(0.0), Edge::fill(0.0));
    Field lo(g), hi(g);
    for (int i = 0; i < g.ax[0].n; ++i) {
        double z = g.ax[0].coord(i);
        lo.at(i) = 0.3 * std::exp(-z * z);
        hi.at(i) = lo.at(i) + 0.2 * std::exp(-0.5 * z * z);
    }
    EvolveOptions opt;
    opt.dt = 0.025;
    FrameSpec fs = gauss_frame(0.4);
    Evolution a(g, fs, [&](double x) { return law(x); }, const_hist(lo, 1.0, 40), opt);
    Evolution b(g, fs, [&](double x) { return law(x); }, const_hist(hi, 1.0, 40), opt);
    for (int k = 0; k < 80; ++k) {
        a.step();
        b.step();
        for (std::size_t i = 0; i < lo.v.size(); ++i)
            REQUIRE(b.state().v[i] >= a.state().v[i] - 1e-12);
    }
}

TEST_CASE("spatially constant runs reproduce the scalar delayed flow") {
    // replicate edges keep constants: the field obeys x' = -x + g(x(t-h))
    BirthLaw law = BirthLaw::nicholson(2.0);
    Grid g = Grid::line(0.0, 0.4, 0.2, Edge::replicate(), Edge::replicate());
    Field f(g, 0.9);
    EvolveOptions opt;
    opt.dt = 0.005;
    FrameSpec fs = gauss_frame(1.3);
    Evolution ev(g, fs, [&](double x) { return law(x); }, const_hist(f, 1.0, 200), opt);
    double t_end = 5.0;
    ev.run(static_cast<int>(std::round(t_end / opt.dt)));

    auto rhs = [&](double x, double xd) { return -x + law(xd); };
    OdeTrace tr = delay_ode(rhs, [](double) { return 0.9; }, 1.0, t_end, 0.005);
    auto orc = oracle::dde_solve([&](double x, double xd) { return -x + law(xd); },
                                 [](double) { return 0.9; }, 1.0, t_end, 0.005);
    double lib = ev.state().v[1];
    REQUIRE(tr.back() == Approx(orc.back()).margin(1e-9));
    REQUIRE(lib == Approx(tr.back()).margin(2e-4));

    // halving dt quarters the gap to the high-order reference
    EvolveOptions opt2;
    opt2.dt = 0.0025;
    Evolution ev2(g, fs, [&](double x) { return law(x); }, const_hist(f, 1.0, 400), opt2);
    ev2.run(static_cast<int>(std::round(t_end / opt2.dt)));
    double e1 = std::abs(lib - tr.back());
    double e2 = std::abs(ev2.state().v[1] - tr.back());
    REQUIRE(e2 < e1 / 2.5);
}

TEST_CASE("delayed logistic ode agrees with the independent solver") {
    auto f = [](double x, double xd) { return xd * (1.0 - x); };
    auto hist = [](double) { return 0.5; };
    OdeTrace tr = delay_ode(f, hist, 1.0, 5.0, 0.001);
    auto orc = oracle::dde_solve(f, hist, 1.0, 5.0, 0.001);
    REQUIRE(tr.back() == Approx(orc.back()).margin(1e-8));

    // x' = -x(t-1) with unit history has x(2) = -1/2 exactly.  The derivative
    // kink where history meets solution is smoothed by the interpolation cell
    // that straddles it, which costs one order: the rate is quadratic.
    auto lin_err = [](double dt) {
        OdeTrace lin = delay_ode([](double, double xd) { return -xd; },
                                 [](double) { return 1.0; }, 1.0, 2.0, dt);
        return std::abs(lin.back() + 0.5);
    };
    REQUIRE(lin_err(0.0125) < 2e-5);
    REQUIRE(lin_err(0.05) / lin_err(0.0125) > 10.0);
}

TEST_CASE("refinement in space and time converges at second order") {
    BirthLaw law = BirthLaw::kpp_quadratic(1.5);
    auto bump = [](double z) { return 0.4 * std::exp(-z * z); };
    auto run = [&](double dz, double dt) {
        Grid g = Grid::line(-15.0, 15.0, dz, Edge::fill(0.0), Edge::fill(0.0));
        Field f(g);
        for (int i = 0; i < g.ax[0].n; ++i) f.at(i) = bump(g.ax[0].coord(i));
        EvolveOptions opt;
        opt.dt = dt;
        FrameSpec fs = FrameSpec::line(0.5, 0.5, Kernel::gaussian(0.0, 0.5), 1.5, 1.5);
        Evolution ev(g, fs, [&](double x) { return law(x); },
                     const_hist(f, 0.5, static_cast<int>(std::round(0.5 / dt))), opt);
        ev.run(static_cast<int>(std::round(1.0 / dt)));
        return ev.state();
    };
    Field u1 = run(0.15, 0.025), u2 = run(0.075, 0.0125), u3 = run(0.0375, 0.00625);
    double e1 = 0.0, e2 = 0.0;
    for (int i = 0; i < u1.grid.ax[0].n; ++i) {
        e1 = std::max(e1, std::abs(u1.at(i) - u2.at(2 * i)));
        e2 = std::max(e2, std::abs(u2.at(2 * i) - u3.at(4 * i)));
    }
    double order = std::log2(e1 / e2);
    REQUIRE(order > 1.7);
    REQUIRE(order < 2.4);
}

TEST_CASE("norm guard reports a blow-up instead of propagating garbage") {
    Grid g = Grid::line(-3.0, 3.0, 0.25, Edge::fill(0.0), Edge::fill(0.0));
    Field f(g, 1.0);
    EvolveOptions opt;
    opt.dt = 0.125;
    opt.blowup_guard = 10.0;
    FrameSpec fs = gauss_frame(0.0, 0.5);
    Evolution ev(g, fs, [](double x) { return 100.0 * x; }, const_hist(f, 0.5, 4), opt);
    REQUIRE_THROWS_AS(ev.run(200), std::runtime_error);
}

TEST_CASE("probes read levels, weights, and extrema off the state") {
    Grid g = Grid::line(-2.0, 3.0, 0.5, Edge::fill(0.0), Edge::fill(1.0));
    Field f(g);
    for (int i = 0; i < g.ax[0].n; ++i) {
        double z = g.ax[0].coord(i);
        f.at(i) = std::min(1.0, std::max(0.0, z));
    }
    EvolveOptions opt;
    opt.dt = 0.5;
    FrameSpec fs = gauss_frame(0.0);
    Evolution ev(g, fs, [](double x) { return x; }, const_hist(f, 1.0, 2), opt);

    REQUIRE(eval_probe(ev, {ProbeSpec::Kind::sup_abs, 0.0}) == Approx(1.0));
    REQUIRE(eval_probe(ev, {ProbeSpec::Kind::min_value, 0.0}) == Approx(0.0));
    REQUIRE(eval_probe(ev, {ProbeSpec::Kind::level_inf, 0.75}) == Approx(0.75).margin(1e-12));
    // ramp saturates at the right edge, so the rightmost crossing is the edge
    REQUIRE(eval_probe(ev, {ProbeSpec::Kind::level_sup, 0.75}) == Approx(3.0));

    Field e(g);
    for (int i = 0; i < g.ax[0].n; ++i) e.at(i) = std::exp(g.ax[0].coord(i));
    Evolution ev2(g, fs, [](double x) { return x; }, const_hist(e, 1.0, 2), opt);
    REQUIRE(eval_probe(ev2, {ProbeSpec::Kind::weighted_sup, 1.0}) == Approx(1.0).margin(1e-12));
    REQUIRE(eval_probe(ev2, {ProbeSpec::Kind::weighted_l1, 1.0}) ==
            Approx(0.5 * g.ax[0].n).margin(1e-12));

    TimeSeries ts = simulate(ev, 2.0, 2, {{ProbeSpec::Kind::sup_abs, 0.0}});
    REQUIRE(ts.t.front() == 0.0);
    REQUIRE(ts.t.back() == Approx(2.0));
    REQUIRE(ts.column("sup_abs").size() == ts.t.size());
}

TEST_CASE("planar runs preserve equilibria and match the scalar reduction") {
    BirthLaw law = BirthLaw::nicholson(2.0);
    LawReport rep = analyze(law);
    Kernel k2 = Kernel::tensor_product({Kernel::gaussian(0.0, 1.0), Kernel::gaussian(0.0, 0.5)});
    FrameSpec fs = FrameSpec::planar(0.9, {1.0, 0.0}, 1.0, k2, rep.gprime0, rep.lipschitz);

    Grid gp = Grid::plane(-4.0, 4.0, 0.5, Edge::fill(rep.kappa), Edge::fill(rep.kappa), -3.0,
                          3.0, 0.5, Edge::replicate(), Edge::replicate());
    Field f2(gp, rep.kappa);
    EvolveOptions opt;
    opt.dt = 0.05;
    Evolution ev(gp, fs, [&](double x) { return law(x); }, const_hist(f2, 1.0, 20), opt);
    ev.run(3 * ev.steps_per_delay());
    double err = 0.0;
    for (double v : ev.state().v) err = std::max(err, std::abs(v - rep.kappa));
    REQUIRE(err < 1e-11);

    // spatially constant planar run against the 1D constant run, step by step
    Grid gp2 = Grid::plane(0.0, 1.0, 0.5, Edge::replicate(), Edge::replicate(), 0.0, 1.0, 0.5,
                           Edge::replicate(), Edge::replicate());
    Grid gl = Grid::line(0.0, 1.0, 0.5, Edge::replicate(), Edge::replicate());
    Field s2(gp2, 0.9), s1(gl, 0.9);
    Evolution e2(gp2, fs, [&](double x) { return law(x); }, const_hist(s2, 1.0, 20), opt);
    Evolution e1(gl, gauss_frame(0.9), [&](double x) { return law(x); },
                 const_hist(s1, 1.0, 20), opt);
    for (int k = 0; k < 60; ++k) {
        e1.step();
        e2.step();
        REQUIRE(e2.state().v[0] == Approx(e1.state().v[0]).margin(1e-12));
        // the planar field itself stays constant in space
        for (double v : e2.state().v)
            REQUIRE(v == Approx(e2.state().v[0]).margin(1e-13));
    }
}

TEST_CASE("grid dispersion converges to the continuum characteristic function") {
    FrameSpec fs = gauss_frame(2.5);
    for (double lam : {0.4, 1.0, 2.2}) {
        double exact = char_eval(fs, lam);
        double c1 = discrete_char_eval(fs, 0.08, lam) - exact;
        double c2 = discrete_char_eval(fs, 0.04, lam) - exact;
        REQUIRE(std::abs(c2) < std::abs(c1));
        REQUIRE(c1 / c2 == Approx(4.0).margin(0.8));
    }

    auto cont = char_roots(fs);
    auto disc = discrete_char_roots(fs, 0.02);
    REQUIRE(disc.lambda1 == Approx(cont.lambda1).margin(2e-4));
    REQUIRE(disc.lambda2 == Approx(cont.lambda2).margin(2e-3));

    auto cs = critical_speeds(gauss_frame(0.0));
    double dc = discrete_critical_speed(gauss_frame(0.0), 0.05);
    REQUIRE(dc == Approx(cs.c_plus).margin(2e-2));
    double gap1 = std::abs(discrete_critical_speed(gauss_frame(0.0), 0.16) - cs.c_plus);
    double gap2 = std::abs(discrete_critical_speed(gauss_frame(0.0), 0.04) - cs.c_plus);
    REQUIRE(gap2 < gap1);
}
