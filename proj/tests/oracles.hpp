#pragma once

// Reference computations for the test suite, kept deliberately independent of
// the library's own numerics: fixed-step Simpson instead of adaptive
// quadrature, long double bisection, closed-form erfc tails, and a quadratic
// root formula.  Agreement between these and the library is the point of the
// tests, so nothing here may call into semiwave/.

#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracle {

// composite Simpson with n (even) fixed subintervals
template <class F>
long double simpson(F&& f, long double a, long double b, int n) {
    if (n % 2) ++n;
    long double dx = (b - a) / n;
    long double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + dx * i) * (i % 2 ? 4.0L : 2.0L);
    return s * dx / 3.0L;
}

// doubling Simpson until successive estimates agree to tol
template <class F>
long double simpson_auto(F&& f, long double a, long double b, long double tol = 1e-14L) {
    int n = 64;
    long double prev = simpson(f, a, b, n);
    for (int k = 0; k < 16; ++k) {
        n *= 2;
        long double cur = simpson(f, a, b, n);
        if (std::abs(cur - prev) < tol * (1.0L + std::abs(cur))) return cur;
        prev = cur;
    }
    return prev;
}

// bisection in long double on a sign-bracketed increasing function
template <class F>
long double bisect(F&& f, long double lo, long double hi, int iters = 200) {
    long double flo = f(lo), fhi = f(hi);
    if (flo > 0 || fhi < 0) throw std::runtime_error("oracle::bisect: bad bracket");
    for (int i = 0; i < iters; ++i) {
        long double mid = 0.5L * (lo + hi);
        (f(mid) < 0 ? lo : hi) = mid;
    }
    return 0.5L * (lo + hi);
}

struct Quad {
    double r1, r2;  // roots of x^2 + b x + c, r1 <= r2
};

inline Quad quadratic_roots(double b, double c) {
    double disc = b * b - 4.0 * c;
    if (disc < 0) throw std::runtime_error("oracle::quadratic_roots: complex roots");
    double s = std::sqrt(disc);
    double r1 = (-b - s) / 2.0, r2 = (-b + s) / 2.0;
    return {r1, r2};
}

// mass of a gaussian(mu, sigma2, mass) density to the right of a
inline long double gauss_tail_right(long double mu, long double sigma2, long double mass,
                                    long double a) {
    return mass * 0.5L * std::erfc((a - mu) / std::sqrt(2.0L * sigma2));
}

inline long double gauss_tail_left(long double mu, long double sigma2, long double mass,
                                   long double a) {
    return mass * 0.5L * std::erfc((mu - a) / std::sqrt(2.0L * sigma2));
}

// gaussian two-sided Laplace transform, integral of e^{-lambda y} times the density
inline long double gauss_mgf(long double mu, long double sigma2, long double mass,
                             long double lambda) {
    return mass * std::exp(-lambda * mu + 0.5L * lambda * lambda * sigma2);
}

// |integral of e^{-(lambda + i zeta) y} K(y) dy| by direct quadrature over [a, b]
template <class Density>
long double weighted_transform_mag(Density&& k, long double lambda, long double zeta,
                                   long double a, long double b) {
    long double re = simpson(
        [&](long double y) { return k(y) * std::exp(-lambda * y) * std::cos(zeta * y); }, a, b,
        40000);
    long double im = simpson(
        [&](long double y) { return k(y) * std::exp(-lambda * y) * std::sin(zeta * y); }, a, b,
        40000);
    return std::sqrt(re * re + im * im);
}

// scalar delay ODE x'(t) = f(x(t), x(t-h)) by method of steps:
// classical RK4 with cubic Hermite interpolation of the stored history.
// history(s) supplies x on [-h, 0]; returns samples at t = 0, dt, ..., T.
inline std::vector<double> dde_solve(const std::function<double(double, double)>& f,
                                     const std::function<double(double)>& history, double h,
                                     double T, double dt) {
    int steps = static_cast<int>(std::llround(T / dt));
    int lag = static_cast<int>(std::llround(h / dt));
    if (std::abs(lag * dt - h) > 1e-12 * h) throw std::runtime_error("oracle::dde_solve: dt must divide h");
    std::vector<double> x(static_cast<std::size_t>(steps) + 1);
    std::vector<double> slope(static_cast<std::size_t>(steps) + 1, 0.0);
    x[0] = history(0.0);
    auto delayed = [&](double t) {
        double s = t - h;
        if (s <= 0.0) return history(s);
        double idx = s / dt;
        auto i = static_cast<std::size_t>(idx);
        if (i >= x.size() - 1) return x.back();
        double th = idx - static_cast<double>(i);
        // cubic Hermite using stored slopes
        double p0 = x[i], p1 = x[i + 1], m0 = slope[i] * dt, m1 = slope[i + 1] * dt;
        double t2 = th * th, t3 = t2 * th;
        return (2 * t3 - 3 * t2 + 1) * p0 + (t3 - 2 * t2 + th) * m0 + (-2 * t3 + 3 * t2) * p1 +
               (t3 - t2) * m1;
    };
    slope[0] = f(x[0], delayed(0.0));
    for (int n = 0; n < steps; ++n) {
        double t = n * dt;
        double xn = x[static_cast<std::size_t>(n)];
        double k1 = f(xn, delayed(t));
        double k2 = f(xn + 0.5 * dt * k1, delayed(t + 0.5 * dt));
        double k3 = f(xn + 0.5 * dt * k2, delayed(t + 0.5 * dt));
        double k4 = f(xn + dt * k3, delayed(t + dt));
        x[static_cast<std::size_t>(n) + 1] = xn + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
        slope[static_cast<std::size_t>(n) + 1] =
            f(x[static_cast<std::size_t>(n) + 1], delayed(t + dt));
    }
    return x;
}

}  // namespace oracle
