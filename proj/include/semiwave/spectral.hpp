#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "birth_law.hpp"
#include "kernel.hpp"
#include "numerics.hpp"

namespace semiwave {

/// Moving-frame description of the delayed non-local problem: dimension,
/// frame speed, unit direction of propagation, delay, dispersal kernel, and
/// the two slopes of the reaction law that the linear theory needs.
struct FrameSpec {
    int dim = 1;
    double speed = 0.0;
    Vec2 direction{1.0, 0.0};
    double delay = 1.0;
    Kernel kernel = Kernel::gaussian(0.0, 1.0);
    double gprime0 = 2.0;  // slope of the law at zero
    double lip = 2.0;      // global Lipschitz bound of the law

    static FrameSpec line(double c, double h, Kernel k, const BirthLaw& g) {
        LawReport r = analyze(g);
        return line(c, h, std::move(k), r.gprime0, r.lipschitz);
    }

    static FrameSpec line(double c, double h, Kernel k, double gp0, double lipschitz) {
        FrameSpec f;
        f.dim = 1;
        f.speed = c;
        f.direction = {1.0, 0.0};
        f.delay = h;
        f.kernel = std::move(k);
        f.gprime0 = gp0;
        f.lip = lipschitz;
        f.validate();
        return f;
    }

    static FrameSpec planar(double c, Vec2 nu, double h, Kernel k, double gp0, double lipschitz) {
        FrameSpec f;
        f.dim = 2;
        f.speed = c;
        f.direction = nu;
        f.delay = h;
        f.kernel = std::move(k);
        f.gprime0 = gp0;
        f.lip = lipschitz;
        f.validate();
        return f;
    }

    void validate() const {
        if (dim != 1 && dim != 2) throw std::invalid_argument("FrameSpec: dim must be 1 or 2");
        if (kernel.dim() != dim) throw std::invalid_argument("FrameSpec: kernel dimension mismatch");
        double n2 = norm2(direction, dim);
        if (std::abs(n2 - 1.0) > 1e-12)
            throw std::invalid_argument("FrameSpec: direction must be a unit vector");
        if (!(delay > 0)) throw std::invalid_argument("FrameSpec: delay must be positive");
        if (!(gprime0 > 0) || !(lip > 0))
            throw std::invalid_argument("FrameSpec: law slopes must be positive");
    }

    /// 1D reduction of the kernel along the propagation axis.  For planar
    /// frames the direction must be axis-aligned and the transverse factor
    /// must carry unit mass.
    Kernel axis_kernel() const {
        if (dim == 1) return kernel;
        int ax;
        if (std::abs(std::abs(direction[0]) - 1.0) < 1e-12) ax = 0;
        else if (std::abs(std::abs(direction[1]) - 1.0) < 1e-12) ax = 1;
        else throw std::invalid_argument("FrameSpec: axis reduction needs an axis-aligned direction");
        Kernel on = kernel.factor(ax), off = kernel.factor(1 - ax);
        if (std::abs(off.mass() - 1.0) > 1e-12)
            throw std::invalid_argument("FrameSpec: transverse kernel factor must have unit mass");
        return std::abs(direction[ax]) == direction[ax] ? on : on.reflected();
    }
};

struct PQ {
    double p;  // |lambda|^2 - c nu.lambda - 1
    double q;  // lip * exp(-lambda.nu ch) * mgf(lambda) >= 0
};

namespace detail {

inline double q_value(const FrameSpec& f, Vec2 lambda, double multiplier) {
    double along = dot(lambda, f.direction, f.dim);
    // exponents are combined before the (guarded) exp: the drift prefactor and
    // the kernel transform can individually under/overflow at large |lambda|
    double le = -along * f.speed * f.delay + f.kernel.log_mgf(lambda, f.dim);
    return multiplier * exp_guarded(le);
}

}  // namespace detail

inline PQ pq(const FrameSpec& f, Vec2 lambda) {
    double along = dot(lambda, f.direction, f.dim);
    double p = norm2(lambda, f.dim) - f.speed * along - 1.0;
    return {p, detail::q_value(f, lambda, f.lip)};
}

inline PQ pq(const FrameSpec& f, double lambda) {
    return pq(f, scaled(f.direction, lambda));
}

/// Characteristic function at the trivial equilibrium, E(lambda) =
/// lambda^2 - c lambda - 1 + g'(0) e^{-lambda c h} mgf(lambda), with lambda
/// measured along the propagation direction.
inline double char_eval(const FrameSpec& f, double lambda) {
    Vec2 lv = scaled(f.direction, lambda);
    double p = lambda * lambda - f.speed * lambda - 1.0;
    return p + detail::q_value(f, lv, f.gprime0);
}

struct CharRoots {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    int j_c = 0;  // 1 when the two roots coincide within merge tolerance
    bool near_boundary = false;
};

struct CriticalSpeeds {
    double c_minus = 0.0;
    double c_plus = 0.0;
};

namespace detail {

/// Scan window along the frame axis: kernel admissibility shrunk slightly and
/// clipped to a speed-dependent finite box.
inline std::pair<double, double> lambda_window(const FrameSpec& f) {
    auto [wlo, whi] = f.axis_kernel().admissible_window(0);
    double clip = std::abs(f.speed) + 60.0;
    double lo = std::max(wlo, -clip), hi = std::min(whi, clip);
    if (std::isfinite(wlo) || std::isfinite(whi)) {
        double w = hi - lo;
        lo += 1e-9 * w;
        hi -= 1e-9 * w;
    }
    return {lo, hi};
}

}  // namespace detail

/// Real roots of the characteristic function.  The function is strictly
/// convex in lambda (the quadratic part plus a log-convex exponential term),
/// so a sign scan plus golden minimization is exhaustive.
inline CharRoots char_roots(const FrameSpec& f) {
    auto [lo, hi] = detail::lambda_window(f);
    auto E = [&](double lam) { return char_eval(f, lam); };

    const int n = 10000;
    double dx = (hi - lo) / n;
    double xm = lo, fm = E(lo);
    std::vector<double> brackets;  // left ends of sign-change cells
    for (int i = 1; i <= n; ++i) {
        double x = lo + dx * i;
        double fx = E(x);
        if ((fm < 0) != (fx < 0)) brackets.push_back(x - dx);
        if (fx < fm) { /* keep for diagnostics */ }
        xm = x;
        fm = fx;
    }
    (void)xm;

    CharRoots out;
    if (brackets.size() >= 2) {
        auto root_in = [&](double a, double b) {
            bool increasing = E(b) > E(a);
            return bisect([&](double t) { return increasing ? E(t) : -E(t); }, a, b,
                          {1e-13, 0.0, 200});
        };
        out.lambda1 = root_in(brackets.front(), brackets.front() + dx);
        out.lambda2 = root_in(brackets.back(), brackets.back() + dx);
    } else {
        // no (or one) crossing resolved by the scan: locate the convex minimum
        double argmin = golden_min(E, lo, hi, 1e-12);
        double emin = E(argmin);
        double scale = 1.0 + std::abs(f.gprime0);
        if (emin > 1e-12 * scale)
            throw std::domain_error("char_roots: no real characteristic roots at speed " +
                                    std::to_string(f.speed) + " (inside the spectral gap)");
        if (emin >= -1e-12 * scale) {
            out.lambda1 = out.lambda2 = argmin;
            out.j_c = 1;
        } else {
            out.lambda1 = bisect([&](double t) { return -E(t); }, lo, argmin, {1e-13, 0.0, 200});
            out.lambda2 = bisect(E, argmin, hi, {1e-13, 0.0, 200});
        }
    }
    if (out.lambda2 < out.lambda1) std::swap(out.lambda1, out.lambda2);
    if (std::abs(out.lambda2 - out.lambda1) < 1e-6 * (1.0 + std::abs(out.lambda1))) out.j_c = 1;

    double margin = 1e-4 * (hi - lo);
    out.near_boundary = (out.lambda1 - lo < margin) || (hi - out.lambda2 < margin);

    // roots bracket zero away from them: both must lie on one side of 0
    if (f.gprime0 * f.kernel.mass() > 1.0 && out.lambda1 * out.lambda2 < 0.0)
        throw std::logic_error("char_roots: roots of mixed sign; E(0) > 0 excludes this");
    return out;
}

namespace detail {

/// min over one sign of lambda of the characteristic function at speed c.
inline double char_min_signed(const FrameSpec& tmpl, double c, bool positive_side) {
    FrameSpec f = tmpl;
    f.speed = c;
    auto [lo, hi] = lambda_window(f);
    double a = positive_side ? std::max(lo, 1e-10) : lo;
    double b = positive_side ? hi : std::min(hi, -1e-10);
    if (!(a < b)) return inf;
    double arg = golden_min([&](double lam) { return char_eval(f, lam); }, a, b, 1e-10);
    return char_eval(f, arg);
}

}  // namespace detail

/// Smallest speed whose characteristic function admits a positive real root,
/// and (by kernel reflection) the mirror threshold for negative roots.  The
/// minimum of E over lambda > 0 decreases strictly in c, so the outer
/// bisection is rigorous.
inline CriticalSpeeds critical_speeds(const FrameSpec& tmpl) {
    if (!(tmpl.gprime0 * tmpl.kernel.mass() > 1.0))
        throw std::domain_error("critical_speeds: need g'(0) * mass > 1");

    auto c_plus_of = [](const FrameSpec& f) {
        double lo = -50.0, hi = 50.0;
        int grow = 0;
        while (detail::char_min_signed(f, hi, true) > 0.0) {
            if (++grow > 3) throw std::runtime_error("critical_speeds: scan range exhausted (high side)");
            hi *= 2.0;
        }
        grow = 0;
        while (detail::char_min_signed(f, lo, true) <= 0.0) {
            if (++grow > 3) throw std::runtime_error("critical_speeds: scan range exhausted (low side)");
            lo *= 2.0;
        }
        // min E is decreasing in c: root of c -> -min E (increasing)
        double c = bisect([&](double cc) { return -detail::char_min_signed(f, cc, true); }, lo, hi,
                          {1e-8, 0.0, 200});
        // Newton polish on the envelope s(c) = min E: s'(c) = dE/dc at the
        // minimizer.  Drives the tangency residual to machine level so the
        // double root is actually a double root for root finders downstream.
        for (int it = 0; it < 3; ++it) {
            FrameSpec fc = f;
            fc.speed = c;
            auto [wlo, whi] = detail::lambda_window(fc);
            double a = std::max(wlo, 1e-10);
            if (!(a < whi)) break;
            double arg = golden_min([&](double lam) { return char_eval(fc, lam); }, a, whi, 1e-12);
            double val = char_eval(fc, arg);
            double qpart = detail::q_value(fc, scaled(fc.direction, arg), fc.gprime0);
            double ds = -arg * (1.0 + fc.delay * qpart);
            if (!(ds < 0)) break;
            double next = c - val / ds;
            if (next <= lo || next >= hi) break;
            c = next;
        }
        return c;
    };

    CriticalSpeeds out;
    out.c_plus = c_plus_of(tmpl);
    FrameSpec mirror = tmpl;
    mirror.kernel = tmpl.kernel.reflected();
    out.c_minus = -c_plus_of(mirror);
    if (!(out.c_minus < out.c_plus))
        throw std::logic_error("critical_speeds: thresholds out of order");
    return out;
}

/// Unique real root of gamma + p + q e^{h gamma} = 0; the map is strictly
/// increasing so a sign bracket always exists, and two Newton steps polish
/// the bisection result to machine residual.
inline double gamma_lambda(const FrameSpec& f, Vec2 lambda) {
    auto [p, q] = pq(f, lambda);
    if (!std::isfinite(q))
        throw std::overflow_error("gamma_lambda: q overflows at this weight");
    const double h = f.delay;
    auto F = [&](double g) { return g + p + q * exp_guarded(h * g); };
    double span = std::abs(p) + q + 1.0;
    double g = bisect(F, -span, span, {1e-13, 0.0, 200});
    for (int i = 0; i < 3; ++i) {
        double e = exp_guarded(h * g);
        g -= (g + p + q * e) / (1.0 + h * q * e);
    }
    return g;
}

inline double gamma_lambda(const FrameSpec& f, double lambda) {
    return gamma_lambda(f, scaled(f.direction, lambda));
}

/// eps_h = 1/(1 + h q e^{h gamma}) in (0, 1].
inline double eps_h(const FrameSpec& f, Vec2 lambda) {
    double g = gamma_lambda(f, lambda);
    double q = pq(f, lambda).q;
    return 1.0 / (1.0 + f.delay * q * exp_guarded(f.delay * g));
}

inline double eps_h(const FrameSpec& f, double lambda) {
    return eps_h(f, scaled(f.direction, lambda));
}

/// Heat-bound prefactor ((1 + h q e^{gamma h})/(4 pi))^{d/2} = (4 pi eps_h)^{-d/2}.
inline double a_lambda(const FrameSpec& f, Vec2 lambda) {
    return std::pow(1.0 / (4.0 * pi * eps_h(f, lambda)), 0.5 * f.dim);
}

inline double a_lambda(const FrameSpec& f, double lambda) {
    return a_lambda(f, scaled(f.direction, lambda));
}

/// Frequency-dependent modulus entering the frequency-sliced decay estimate:
/// qhat(zeta) = lip e^{-lambda.nu ch} |weighted kernel transform|, normalized
/// so qhat(0) = q.
inline double q_hat(const FrameSpec& f, Vec2 lambda, Vec2 zeta) {
    double along = dot(lambda, f.direction, f.dim);
    double tp = std::pow(2.0 * pi, f.dim);
    double wfm = f.kernel.weighted_fourier_magnitude(lambda, zeta, f.dim);
    return f.lip * exp_guarded(-along * f.speed * f.delay) * tp * wfm;
}

/// Unique real root of l = -|zeta|^2 + p + qhat(zeta) e^{-h l}; at zeta = 0
/// this is exactly -gamma_lambda.
inline double l_lambda(const FrameSpec& f, Vec2 lambda, Vec2 zeta) {
    double p = pq(f, lambda).p;
    double z2 = norm2(zeta, f.dim);
    double qh = q_hat(f, lambda, zeta);
    if (!std::isfinite(qh)) throw std::overflow_error("l_lambda: transform overflows");
    const double h = f.delay;
    auto G = [&](double l) { return l + z2 - p - qh * exp_guarded(-h * l); };
    double hi = std::abs(p) + qh + 1.0;
    double lo = -(std::abs(p) + z2 + qh + 1.0);
    while (G(lo) > 0.0) lo = 2.0 * lo - 1.0;  // exp side, cannot fail for long
    double l = bisect(G, lo, hi, {1e-13, 0.0, 300});
    for (int i = 0; i < 3; ++i) {
        double e = exp_guarded(-h * l);
        l -= (l + z2 - p - qh * e) / (1.0 + h * qh * e);
    }
    return l;
}

/// Largest gamma in (0, min(cap, 1)) with rho e^{gamma h} <= (1 - gamma),
/// shaved by a relative 1e-9 so the strict inequality survives roundoff.
/// Empty when rho is too large for any positive gamma.
inline std::optional<double> gamma_star(double rho, double h, double gamma_cap = 1.0) {
    if (!(rho >= 0) || !(h > 0)) throw std::invalid_argument("gamma_star: need rho >= 0, h > 0");
    const double shave = 1.0 - 1e-9;
    if (rho >= shave) return std::nullopt;
    double hi = std::min(gamma_cap, 1.0);
    if (!(hi > 0)) return std::nullopt;
    auto fcn = [&](double g) { return rho * std::exp(g * h) - (1.0 - g) * shave; };
    if (fcn(hi) <= 0.0) return hi;
    return bisect(fcn, 0.0, hi, {1e-10, 0.0, 200});
}

/// Smallest shift delta > max(1+h, 2h) making
/// rho (t+delta)^{d/2} / (t+delta-h)^{d/2} + d / (2 (t+delta)) < 1 for every
/// t >= -h.  Both terms peak at t = -h and fall off monotonically, so the
/// endpoint check suffices; a coarse t-grid re-check guards the claim.
inline double delta_star(double rho_eps, double h, int d) {
    if (!(rho_eps < 1.0)) throw std::domain_error("delta_star: no solution for rho >= 1");
    if (!(rho_eps >= 0) || !(h > 0) || (d != 1 && d != 2))
        throw std::invalid_argument("delta_star: bad arguments");
    auto lhs = [&](double t, double delta) {
        double a = t + delta, b = t + delta - h;
        return rho_eps * std::pow(a / b, 0.5 * d) + 0.5 * d / a;
    };
    const double base = std::max(1.0 + h, 2.0 * h);
    const double step = 1e-3;
    for (long k = 1; k <= 100000000L; ++k) {
        double delta = base + step * k;
        if (lhs(-h, delta) >= 1.0) continue;
        bool ok = true;
        for (int j = 0; j <= 256 && ok; ++j)
            ok = lhs(-h + j * (10.0 * h + 10.0) / 256.0, delta) < 1.0;
        if (ok) return delta;
    }
    throw std::runtime_error("delta_star: search did not terminate");
}

/// Anchor for the weight kink of the trapping sub/super pair: solves
/// g'(0) * (kernel tail mass beyond b - z_anchor - ch) = gamma e^{-gamma h},
/// using the right tail for right-moving trapping and the left tail for the
/// mirror case.  gamma = 0 is admissible only for compactly supported kernels.
inline double b_gamma(double z_anchor, const FrameSpec& f, double gamma, Side side) {
    if (!(gamma >= 0) || !(gamma < f.gprime0))
        throw std::invalid_argument("b_gamma: need gamma in [0, g'(0))");
    Kernel axis = f.axis_kernel();
    double level = gamma * std::exp(-gamma * f.delay) / f.gprime0;
    if (level >= axis.mass())
        throw std::domain_error("b_gamma: tail level exceeds kernel mass");
    double a = axis.tail_quantile(level, side);
    return a + z_anchor + f.speed * f.delay;
}

/// Everything the linear analysis knows about one frame and one weight.
struct SpectralReport {
    double lambda = 0.0;
    double p_lambda = 0.0;
    double q_lambda = 0.0;
    double E_value = 0.0;
    double gamma_lambda = 0.0;
    double eps_h = 0.0;
    double A_lambda = 0.0;
    std::optional<CharRoots> roots;
    std::optional<CriticalSpeeds> criticals;
};

inline SpectralReport analyze_frame(const FrameSpec& f, double lambda, bool want_roots = true,
                                    bool want_criticals = false) {
    SpectralReport r;
    r.lambda = lambda;
    auto [p, q] = pq(f, lambda);
    r.p_lambda = p;
    r.q_lambda = q;
    r.E_value = char_eval(f, lambda);
    r.gamma_lambda = semiwave::gamma_lambda(f, lambda);
    r.eps_h = semiwave::eps_h(f, lambda);
    r.A_lambda = std::pow(1.0 / (4.0 * pi * r.eps_h), 0.5 * f.dim);
    if (want_roots) {
        try {
            r.roots = char_roots(f);
        } catch (const std::domain_error&) {
            r.roots = std::nullopt;
        }
    }
    if (want_criticals) r.criticals = critical_speeds(f);
    return r;
}

}  // namespace semiwave
