#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace semiwave {

constexpr double pi = 3.14159265358979323846;
constexpr double inf = std::numeric_limits<double>::infinity();

/// Small fixed vector for 1D/2D frames. 1D quantities live in component 0.
using Vec2 = std::array<double, 2>;

inline double dot(const Vec2& a, const Vec2& b, int dim) {
    double s = a[0] * b[0];
    if (dim > 1) s += a[1] * b[1];
    return s;
}

inline double norm2(const Vec2& a, int dim) { return dot(a, a, dim); }

inline Vec2 scaled(const Vec2& a, double s) { return {a[0] * s, a[1] * s}; }

/// exp with the result clamped to finite range; exponents beyond ~709 saturate
/// instead of producing inf so that root-finding residuals stay orderable.
inline double exp_guarded(double x) {
    if (x > 700.0) return std::exp(700.0);
    if (x < -745.0) return 0.0;
    return std::exp(x);
}

// ---------------------------------------------------------------------------
// root finding: bracketed bisection (monotonicity is the caller's contract)

struct BisectOptions {
    double x_tol = 1e-13;
    double f_tol = 0.0;       // optional early exit on |f| <= f_tol
    int max_iter = 200;
};

/// Bisection on [lo, hi] with f(lo) and f(hi) of opposite sign (or zero).
/// Returns the midpoint of the final bracket.
template <class F>
double bisect(F&& f, double lo, double hi, BisectOptions opt = {}) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0) == (fhi > 0))
        throw std::runtime_error("bisect: endpoints do not bracket a sign change");
    for (int i = 0; i < opt.max_iter; ++i) {
        double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;  // interval at floating-point resolution
        double fm = f(mid);
        if (fm == 0.0 || (opt.f_tol > 0 && std::abs(fm) <= opt.f_tol)) return mid;
        if ((fm > 0) == (fhi > 0)) { hi = mid; fhi = fm; }
        else { lo = mid; flo = fm; }
        if (hi - lo <= opt.x_tol * (1.0 + std::abs(lo) + std::abs(hi))) break;
    }
    return 0.5 * (lo + hi);
}

/// Widen [lo, hi] geometrically until f changes sign across it.  f must be
/// increasing (pass the negation otherwise).  Throws after max_grow doublings.
template <class F>
std::pair<double, double> widen_increasing(F&& f, double lo, double hi, int max_grow = 60) {
    double step = std::max(1.0, hi - lo);
    for (int i = 0; i < max_grow && f(lo) > 0; ++i) { lo -= step; step *= 2; }
    step = std::max(1.0, hi - lo);
    for (int i = 0; i < max_grow && f(hi) < 0; ++i) { hi += step; step *= 2; }
    if (f(lo) > 0 || f(hi) < 0)
        throw std::runtime_error("widen_increasing: no sign change found");
    return {lo, hi};
}

// ---------------------------------------------------------------------------
// golden-section minimization (caller guarantees unimodality on [a, b])

template <class F>
double golden_min(F&& f, double a, double b, double tol = 1e-10, int max_iter = 400) {
    constexpr double invphi = 0.6180339887498949;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < max_iter && (b - a) > tol * (1.0 + std::abs(a) + std::abs(b)); ++i) {
        if (f1 <= f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - invphi * (b - a); f1 = f(x1);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + invphi * (b - a); f2 = f(x2);
        }
    }
    return 0.5 * (a + b);
}

// ---------------------------------------------------------------------------
// adaptive Simpson quadrature

namespace detail {
template <class F>
double simpson_rec(F& f, double a, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

template <class F>
double integrate(F&& f, double a, double b, double abs_tol = 1e-12, int max_depth = 48) {
    if (a == b) return 0.0;
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::simpson_rec(f, a, b, fa, fm, fb, whole, abs_tol, max_depth);
}

/// Integral over [a, inf) (or (-inf, a] with side < 0): fixed windows of
/// doubling width until a window contributes less than tol.
template <class F>
double integrate_tail(F&& f, double a, int side, double abs_tol = 1e-12) {
    double total = 0.0, width = 1.0;
    double x = a;
    for (int i = 0; i < 64; ++i) {
        double x2 = side > 0 ? x + width : x - width;
        double piece = side > 0 ? integrate(f, x, x2, abs_tol * 0.25)
                                : integrate(f, x2, x, abs_tol * 0.25);
        total += piece;
        x = x2;
        width *= 2.0;
        if (i > 2 && std::abs(piece) < abs_tol) break;
    }
    return total;
}

// ---------------------------------------------------------------------------
// uniform-grid interpolation

/// Catmull-Rom cubic on a uniform grid; clamps to edge values outside.
inline double interp_cubic(const std::vector<double>& v, double lo, double dx, double x) {
    const int n = static_cast<int>(v.size());
    if (n == 0) throw std::runtime_error("interp_cubic: empty samples");
    if (n == 1) return v[0];
    double s = (x - lo) / dx;
    if (s <= 0.0) return v[0];
    if (s >= n - 1) return v[n - 1];
    int j = static_cast<int>(s);
    if (j > n - 2) j = n - 2;
    double t = s - j;
    double p0 = v[j > 0 ? j - 1 : 0];
    double p1 = v[j];
    double p2 = v[j + 1];
    double p3 = v[j + 2 < n ? j + 2 : n - 1];
    double a = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
    double b = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
    double c = -0.5 * p0 + 0.5 * p2;
    return ((a * t + b) * t + c) * t + p1;
}

inline double interp_linear(const std::vector<double>& v, double lo, double dx, double x) {
    const int n = static_cast<int>(v.size());
    if (n == 0) throw std::runtime_error("interp_linear: empty samples");
    double s = (x - lo) / dx;
    if (s <= 0.0) return v[0];
    if (s >= n - 1) return v[n - 1];
    int j = static_cast<int>(s);
    double t = s - j;
    return v[j] * (1.0 - t) + v[j + 1] * t;
}

// ---------------------------------------------------------------------------
// tiny dense linear solve (normal equations for the decay fits)

/// Gaussian elimination with partial pivoting; A is n x n row-major, solves in place.
inline std::vector<double> solve_dense(std::vector<double> A, std::vector<double> b) {
    const int n = static_cast<int>(b.size());
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(A[r * n + col]) > std::abs(A[piv * n + col])) piv = r;
        if (std::abs(A[piv * n + col]) < 1e-300)
            throw std::runtime_error("solve_dense: singular system");
        if (piv != col) {
            for (int k = 0; k < n; ++k) std::swap(A[col * n + k], A[piv * n + k]);
            std::swap(b[col], b[piv]);
        }
        for (int r = col + 1; r < n; ++r) {
            double m = A[r * n + col] / A[col * n + col];
            if (m == 0.0) continue;
            for (int k = col; k < n; ++k) A[r * n + k] -= m * A[col * n + k];
            b[r] -= m * b[col];
        }
    }
    std::vector<double> x(n);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int k = r + 1; k < n; ++k) s -= A[r * n + k] * x[k];
        x[r] = s / A[r * n + r];
    }
    return x;
}

// ---------------------------------------------------------------------------
// hashing and deterministic formatting for reports/manifests

inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed = 14695981039346656037ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

/// Shortest round-trip decimal representation; locale-independent.
inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    double back = std::strtod(buf, nullptr);
    if (back == x) {
        for (int prec = 1; prec < 17; ++prec) {
            char shorter[40];
            std::snprintf(shorter, sizeof shorter, "%.*g", prec, x);
            if (std::strtod(shorter, nullptr) == x) return shorter;
        }
    }
    return buf;
}

}  // namespace semiwave
