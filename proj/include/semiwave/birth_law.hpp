#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kernel.hpp"
#include "numerics.hpp"

namespace semiwave {

/// Reproduction nonlinearity g: [0, inf) -> [0, inf) with g(0) = 0.  Outside
/// [0, domain_cap] the law extends linearly below zero (slope g'(0), so
/// comparison arguments survive tiny undershoots) and as a constant above.
class BirthLaw {
public:
    enum class Form { nicholson, mackey_glass, kpp_quadratic, tabulated };

    static BirthLaw nicholson(double p, double cap = -1.0) {
        if (!(p > 0)) throw std::invalid_argument("BirthLaw::nicholson: p must be > 0");
        BirthLaw g(Form::nicholson);
        g.p0_ = p;
        g.cap_ = cap > 0 ? cap : (p > 1 ? 10.0 * std::log(p) : 10.0);
        return g;
    }

    static BirthLaw mackey_glass(double p, double n, double cap = -1.0) {
        if (!(p > 0) || !(n >= 1))
            throw std::invalid_argument("BirthLaw::mackey_glass: need p > 0 and n >= 1");
        BirthLaw g(Form::mackey_glass);
        g.p0_ = p;
        g.p1_ = n;
        g.cap_ = cap > 0 ? cap : (p > 1 ? 10.0 * std::pow(p - 1.0, 1.0 / n) : 10.0);
        return g;
    }

    /// u(r - u) clipped at zero; positive equilibrium r - 1 for r > 1.
    static BirthLaw kpp_quadratic(double r, double cap = -1.0) {
        if (!(r > 0)) throw std::invalid_argument("BirthLaw::kpp_quadratic: r must be > 0");
        BirthLaw g(Form::kpp_quadratic);
        g.p0_ = r;
        g.cap_ = cap > 0 ? cap : (r > 1 ? 10.0 * (r - 1.0) : 10.0);
        return g;
    }

    /// Piecewise-linear law through (u_i, g_i); u strictly increasing from 0,
    /// g_0 = 0, all g_i >= 0.  Constant beyond the last node.
    static BirthLaw tabulated(std::vector<double> u, std::vector<double> g) {
        if (u.size() != g.size() || u.size() < 2)
            throw std::invalid_argument("BirthLaw::tabulated: need matching u/g with at least two nodes");
        if (u.front() != 0.0 || g.front() != 0.0)
            throw std::invalid_argument("BirthLaw::tabulated: first node must be (0, 0)");
        for (std::size_t i = 0; i + 1 < u.size(); ++i)
            if (!(u[i + 1] > u[i]))
                throw std::invalid_argument("BirthLaw::tabulated: u nodes must be strictly increasing");
        for (double gv : g)
            if (!(gv >= 0) || !std::isfinite(gv))
                throw std::invalid_argument("BirthLaw::tabulated: values must be finite and >= 0");
        BirthLaw law(Form::tabulated);
        law.cap_ = u.back();
        law.tab_u_ = std::move(u);
        law.tab_g_ = std::move(g);
        return law;
    }

    Form form() const { return form_; }
    double domain_cap() const { return cap_; }
    double param(int i) const { return i == 0 ? p0_ : p1_; }

    double operator()(double u) const {
        if (u < 0.0) return gprime0() * u;
        if (u > cap_) u = cap_;
        switch (form_) {
            case Form::nicholson: return p0_ * u * std::exp(-u);
            case Form::mackey_glass: return p0_ * u / (1.0 + std::pow(u, p1_));
            case Form::kpp_quadratic: return std::max(0.0, u * (p0_ - u));
            case Form::tabulated: return tab_eval(u);
        }
        return 0.0;
    }

    double derivative(double u) const {
        if (u < 0.0) return gprime0();
        if (u > cap_) return 0.0;
        switch (form_) {
            case Form::nicholson: return p0_ * std::exp(-u) * (1.0 - u);
            case Form::mackey_glass: {
                double un = std::pow(u, p1_);
                double den = 1.0 + un;
                return p0_ * (1.0 + (1.0 - p1_) * un) / (den * den);
            }
            case Form::kpp_quadratic: return u * (p0_ - u) > 0.0 ? p0_ - 2.0 * u : 0.0;
            case Form::tabulated: {
                auto it = std::upper_bound(tab_u_.begin(), tab_u_.end(), u);
                std::size_t j = it == tab_u_.begin() ? 0 : static_cast<std::size_t>(it - tab_u_.begin()) - 1;
                if (j + 1 >= tab_u_.size()) j = tab_u_.size() - 2;
                return (tab_g_[j + 1] - tab_g_[j]) / (tab_u_[j + 1] - tab_u_[j]);
            }
        }
        return 0.0;
    }

    double gprime0() const {
        switch (form_) {
            case Form::nicholson: return p0_;
            case Form::mackey_glass: return p0_;
            case Form::kpp_quadratic: return p0_;
            case Form::tabulated: return (tab_g_[1] - tab_g_[0]) / (tab_u_[1] - tab_u_[0]);
        }
        return 0.0;
    }

private:
    explicit BirthLaw(Form f) : form_(f) {}

    double tab_eval(double u) const {
        if (u >= tab_u_.back()) return tab_g_.back();
        auto it = std::upper_bound(tab_u_.begin(), tab_u_.end(), u);
        std::size_t j = static_cast<std::size_t>(it - tab_u_.begin());
        if (j == 0) return tab_g_.front();
        double t = (u - tab_u_[j - 1]) / (tab_u_[j] - tab_u_[j - 1]);
        return tab_g_[j - 1] * (1.0 - t) + tab_g_[j] * t;
    }

    Form form_;
    double p0_ = 0.0, p1_ = 0.0;
    double cap_ = 10.0;
    std::vector<double> tab_u_, tab_g_;
};

/// Largest slope magnitude of the law on [a, b]: derivative sampling plus
/// difference quotients (which catch slope jumps of clipped/tabulated forms),
/// with local golden refinement around the sampled maximum.
inline double lipschitz_on(const BirthLaw& g, double a, double b) {
    if (!(a <= b)) throw std::invalid_argument("lipschitz_on: need a <= b");
    if (a == b) return 0.0;
    const int n = 8192;
    const double dx = (b - a) / n;
    double best = 0.0;
    double best_x = a;
    double prev = g(a);
    for (int i = 0; i <= n; ++i) {
        double x = a + dx * i;
        double d = std::abs(g.derivative(x));
        if (d > best) { best = d; best_x = x; }
        if (i > 0) {
            double cur = g(x);
            double q = std::abs(cur - prev) / dx;
            if (q > best) { best = q; best_x = x - 0.5 * dx; }
            prev = cur;
        } else {
            prev = g(x);
        }
    }
    double lo = std::max(a, best_x - 2.0 * dx), hi = std::min(b, best_x + 2.0 * dx);
    double refined = golden_min([&](double x) { return -std::abs(g.derivative(x)); }, lo, hi, 1e-12);
    return std::max(best, std::abs(g.derivative(refined)));
}

/// Scalar facts about a law: slope at zero, positive equilibrium, global sup,
/// the invariant interval I_g = [m_g, M_g] with its contraction factor, and
/// whether the iterated map has no 2-cycle below the sup.
struct LawReport {
    double gprime0 = 0;
    double kappa = 0;
    double zeta2 = 0;   // sup of g on [0, inf)
    double M_g = 0;     // max of g on [0, kappa]
    double m_g = 0;     // min of g on [kappa, M_g]
    double rho = 0;     // Lipschitz constant of g on [m_g, M_g]
    bool attractor = false;
    double lipschitz = 0;  // global Lipschitz constant
};

namespace detail {

inline double scan_extremum(const BirthLaw& g, double a, double b, bool maximize) {
    const int n = 8192;
    const double dx = (b - a) / n;
    double best = g(a), best_x = a;
    for (int i = 1; i <= n; ++i) {
        double x = a + dx * i;
        double v = g(x);
        if (maximize ? v > best : v < best) { best = v; best_x = x; }
    }
    double lo = std::max(a, best_x - dx), hi = std::min(b, best_x + dx);
    double x = golden_min([&](double t) { return maximize ? -g(t) : g(t); }, lo, hi, 1e-13);
    double v = g(x);
    return maximize ? std::max(best, v) : std::min(best, v);
}

/// All roots of f on (a, b] located by sign scan + bisection.
template <class F>
inline std::vector<double> scan_roots(F&& f, double a, double b, int n = 8192) {
    std::vector<double> roots;
    double dx = (b - a) / n;
    double xp = a, fp = f(a);
    for (int i = 1; i <= n; ++i) {
        double x = a + dx * i;
        double fx = f(x);
        if (fx == 0.0) {
            roots.push_back(x);
        } else if ((fp < 0) != (fx < 0)) {
            bool increasing = fx > fp;
            roots.push_back(bisect([&](double t) { return increasing ? f(t) : -f(t); }, xp, x,
                                   {1e-14, 0.0, 200}));
        }
        xp = x;
        fp = fx;
    }
    return roots;
}

}  // namespace detail

inline LawReport analyze(const BirthLaw& g) {
    LawReport r;
    r.gprime0 = g.gprime0();
    const double cap = g.domain_cap();

    // positive equilibria of g(u) = u on (0, cap]
    auto fixed = detail::scan_roots([&](double u) { return g(u) - u; }, 1e-9 * cap, cap);
    if (fixed.empty())
        throw std::domain_error("analyze: law has no positive equilibrium (not monostable)");
    if (fixed.size() > 1)
        throw std::domain_error("analyze: law has " + std::to_string(fixed.size()) +
                                " positive equilibria (not monostable)");
    r.kappa = fixed[0];

    r.zeta2 = detail::scan_extremum(g, 0.0, cap, true);
    r.M_g = detail::scan_extremum(g, 0.0, r.kappa, true);
    if (std::abs(r.M_g - r.kappa) <= 1e-9 * (1.0 + r.kappa)) {
        // law increasing up to its equilibrium: the invariant interval degenerates
        r.M_g = r.kappa;
        r.m_g = r.kappa;
        r.rho = 0.0;
    } else {
        r.m_g = detail::scan_extremum(g, r.kappa, r.M_g, false);
        r.rho = lipschitz_on(g, r.m_g, r.M_g);
    }
    r.lipschitz = std::max(r.gprime0, lipschitz_on(g, 0.0, cap));

    // attractor on (0, zeta2]: no 2-cycle (g∘g has the equilibrium as its only
    // fixed point) and cobweb orbits from spread seeds settle at kappa
    auto twocycle = detail::scan_roots([&](double u) { return g(g(u)) - u; }, 1e-9 * r.zeta2, r.zeta2);
    bool unique2 = true;
    for (double root : twocycle)
        if (std::abs(root - r.kappa) > 1e-6 * (1.0 + r.kappa)) unique2 = false;
    bool orbits_converge = true;
    for (int s = 1; s <= 64 && orbits_converge; ++s) {
        double u = r.zeta2 * s / 64.0;
        for (int it = 0; it < 50000 && std::abs(u - r.kappa) > 1e-9; ++it) u = g(u);
        if (std::abs(u - r.kappa) > 1e-3 * (1.0 + r.kappa)) orbits_converge = false;
    }
    r.attractor = unique2 && orbits_converge;
    return r;
}

/// Monotone tabulated envelopes: upper(u) = max of g on [0, u], lower(u) =
/// min of g on [u, cap] (constant past cap).  Tabulated on a dense grid over
/// [0, max(cap, domain_cap)].
inline std::pair<BirthLaw, BirthLaw> envelopes(const BirthLaw& g, double cap) {
    if (!(cap > 0)) throw std::invalid_argument("envelopes: cap must be > 0");
    const double hi = std::max(cap, g.domain_cap());
    const int n = 16384;
    const double dx = hi / n;
    std::vector<double> u(n + 1), val(n + 1);
    for (int i = 0; i <= n; ++i) {
        u[static_cast<std::size_t>(i)] = dx * i;
        val[static_cast<std::size_t>(i)] = g(dx * i);
    }
    // refine interior extrema of the samples so plateau levels are exact: the
    // running max/min otherwise misses a smooth peak between nodes by O(dx^2)
    std::vector<std::pair<double, double>> peaks, pits;
    for (int i = 1; i < n; ++i) {
        auto si = static_cast<std::size_t>(i);
        if (val[si] >= val[si - 1] && val[si] >= val[si + 1]) {
            double x = golden_min([&](double t) { return -g(t); }, u[si - 1], u[si + 1], 1e-13);
            peaks.emplace_back(x, g(x));
        }
        if (u[si] <= cap && val[si] <= val[si - 1] && val[si] <= val[si + 1]) {
            double x = golden_min([&](double t) { return g(t); }, u[si - 1], u[si + 1], 1e-13);
            pits.emplace_back(x, g(x));
        }
    }

    std::vector<double> up(n + 1), low(n + 1);
    double run = 0.0;
    std::size_t pk = 0;
    for (int i = 0; i <= n; ++i) {
        auto si = static_cast<std::size_t>(i);
        run = std::max(run, val[si]);
        while (pk < peaks.size() && peaks[pk].first <= u[si]) run = std::max(run, peaks[pk++].second);
        up[si] = run;
    }
    // running min from the right over [u, cap]; beyond the cap the lower
    // envelope freezes at g(cap)
    int icap = std::min(n, static_cast<int>(std::floor(cap / dx)));
    double runmin = g(cap);
    auto pt = static_cast<std::ptrdiff_t>(pits.size()) - 1;
    std::vector<double> right_min(static_cast<std::size_t>(n) + 1, 0.0);
    for (int i = icap; i >= 0; --i) {
        auto si = static_cast<std::size_t>(i);
        runmin = std::min(runmin, val[si]);
        while (pt >= 0 && pits[static_cast<std::size_t>(pt)].first >= u[si])
            runmin = std::min(runmin, pits[static_cast<std::size_t>(pt--)].second);
        right_min[si] = runmin;
    }
    for (int i = 0; i <= n; ++i)
        low[static_cast<std::size_t>(i)] = i <= icap ? right_min[static_cast<std::size_t>(i)]
                                                     : g(cap);
    return {BirthLaw::tabulated(u, up), BirthLaw::tabulated(std::move(u), std::move(low))};
}

/// Reduction of the delayed equation with decay rate delta and law p*u*e^{-u}
/// to unit decay: time scales by delta, space by sqrt(delta), so the delay
/// becomes delta*h, the law nicholson(p/delta), and the kernel dilates by
/// sqrt(delta).
struct NormalizedProblem {
    BirthLaw law;
    double delay;
    Kernel kernel;
    double time_factor;   // t' = time_factor * t
    double space_factor;  // x' = space_factor * x
};

inline NormalizedProblem nicholson_normalize(double p, double delta, double h, const Kernel& k) {
    if (!(p > 0) || !(delta > 0) || !(h >= 0))
        throw std::invalid_argument("nicholson_normalize: need p > 0, delta > 0, h >= 0");
    double root = std::sqrt(delta);
    return {BirthLaw::nicholson(p / delta), delta * h, k.rescaled_space(root), delta, root};
}

}  // namespace semiwave
