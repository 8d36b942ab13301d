#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fft.hpp"
#include "grid.hpp"
#include "numerics.hpp"

namespace semiwave {

enum class Side { left, right };

namespace detail {
/// exp(w) - 1 with small-|w| series; keeps relative accuracy near w = 0.
inline cplx cexpm1(cplx w) {
    if (std::abs(w) < 1e-4) {
        cplx w2 = w * w;
        return w + 0.5 * w2 + w2 * w / 6.0 + w2 * w2 / 24.0;
    }
    return std::exp(w) - 1.0;
}

/// log((1 - exp(-w))/w), finite for every real w.
inline double log_em1_ratio(double w) {
    double a = std::abs(w);
    if (a < 1e-5) return -0.5 * w + w * w / 24.0;
    double core = std::log1p(-std::exp(-a)) - std::log(a);
    return w > 0 ? core : a + core;
}
}  // namespace detail

/// Spatial interaction kernel: a non-negative L1 density with declared total
/// mass.  1D analytic forms, tabulated samples, and tensor products for 2D.
/// All decay-weighted transforms are exact per form; tabulated forms integrate
/// their linear interpolant in closed form per cell.
class Kernel {
public:
    enum class Form { gaussian, uniform, laplace, tabulated, tensor };

    static Kernel gaussian(double mu, double sigma2, double mass = 1.0) {
        if (!(sigma2 > 0)) throw std::invalid_argument("Kernel::gaussian: sigma2 must be > 0");
        require_mass(mass);
        Kernel k(Form::gaussian, mass);
        k.p0_ = mu;
        k.p1_ = sigma2;
        return k;
    }

    static Kernel uniform(double a, double b, double mass = 1.0) {
        if (!(b > a)) throw std::invalid_argument("Kernel::uniform: need b > a");
        require_mass(mass);
        Kernel k(Form::uniform, mass);
        k.p0_ = a;
        k.p1_ = b;
        return k;
    }

    static Kernel laplace(double mu, double scale, double mass = 1.0) {
        if (!(scale > 0)) throw std::invalid_argument("Kernel::laplace: scale must be > 0");
        require_mass(mass);
        Kernel k(Form::laplace, mass);
        k.p0_ = mu;
        k.p1_ = scale;
        return k;
    }

    /// Density samples on lo, lo+dx, ... whose trapezoid integral must equal
    /// mass within 1e-6.  Interpolation between samples is linear; the density
    /// is zero outside the sampled window.
    static Kernel tabulated(double lo, double dx, std::vector<double> density, double mass = 1.0) {
        if (density.size() < 2 || !(dx > 0))
            throw std::invalid_argument("Kernel::tabulated: need dx > 0 and at least two samples");
        require_mass(mass);
        for (double d : density)
            if (!(d >= 0) || !std::isfinite(d))
                throw std::invalid_argument("Kernel::tabulated: density samples must be finite and >= 0");
        double trapz = 0;
        for (std::size_t i = 0; i + 1 < density.size(); ++i)
            trapz += 0.5 * dx * (density[i] + density[i + 1]);
        if (std::abs(trapz - mass) > 1e-6 * std::max(1.0, std::abs(mass)))
            throw std::invalid_argument("Kernel::tabulated: samples integrate to " + fmt_double(trapz) +
                                        ", declared mass " + fmt_double(mass));
        Kernel k(Form::tabulated, mass);
        k.tab_lo_ = lo;
        k.tab_dx_ = dx;
        k.tab_ = std::move(density);
        return k;
    }

    static Kernel tensor_product(std::vector<Kernel> factors) {
        if (factors.size() != 2)
            throw std::invalid_argument("Kernel::tensor_product: exactly two factors supported");
        double mass = 1.0;
        for (const auto& f : factors) {
            if (f.dim() != 1) throw std::invalid_argument("Kernel::tensor_product: factors must be 1D");
            mass *= f.mass();
        }
        Kernel k(Form::tensor, mass);
        k.factors_ = std::move(factors);
        return k;
    }

    Form form() const { return form_; }
    int dim() const { return form_ == Form::tensor ? static_cast<int>(factors_.size()) : 1; }
    double mass() const { return mass_; }
    const Kernel& factor(int axis) const {
        if (form_ != Form::tensor) {
            if (axis != 0) throw std::invalid_argument("Kernel::factor: 1D kernel has axis 0 only");
            return *this;
        }
        return factors_.at(static_cast<std::size_t>(axis));
    }

    /// Open interval of decay parameters for which the decay-weighted integral
    /// converges on the given axis.
    std::pair<double, double> admissible_window(int axis = 0) const {
        switch (form_) {
            case Form::laplace: return {-1.0 / p1_, 1.0 / p1_};
            case Form::tensor: return factors_.at(axis).admissible_window(0);
            default: return {-inf, inf};
        }
    }

    double density(double y) const {
        switch (form_) {
            case Form::gaussian:
                return mass_ * std::exp(-(y - p0_) * (y - p0_) / (2.0 * p1_)) / std::sqrt(2.0 * pi * p1_);
            case Form::uniform:
                return (y >= p0_ && y <= p1_) ? mass_ / (p1_ - p0_) : 0.0;
            case Form::laplace:
                return mass_ * std::exp(-std::abs(y - p0_) / p1_) / (2.0 * p1_);
            case Form::tabulated: {
                double hi = tab_lo_ + tab_dx_ * (static_cast<double>(tab_.size()) - 1);
                if (y < tab_lo_ || y > hi) return 0.0;
                return interp_linear(tab_, tab_lo_, tab_dx_, y);
            }
            case Form::tensor:
                throw std::invalid_argument("Kernel::density: scalar argument on tensor kernel");
        }
        return 0.0;
    }

    double density2(double x, double y) const {
        if (form_ != Form::tensor) throw std::invalid_argument("Kernel::density2: 2D kernel required");
        return factors_[0].density(x) * factors_[1].density(y);
    }

    /// Decay-weighted total: integral of exp(-lambda*y) K(y) dy.
    double mgf(double lambda) const {
        if (form_ == Form::tensor)
            throw std::invalid_argument("Kernel::mgf: vector argument required for tensor kernel");
        check_admissible(lambda);
        switch (form_) {
            case Form::gaussian:
                return mass_ * std::exp(-lambda * p0_ + 0.5 * lambda * lambda * p1_);
            case Form::uniform: {
                double w = lambda * (p1_ - p0_);
                if (std::abs(w) < 1e-12) return mass_ * std::exp(-lambda * p0_);
                return mass_ * std::exp(-lambda * p0_) * (-std::expm1(-w)) / w;
            }
            case Form::laplace:
                return mass_ * std::exp(-lambda * p0_) / (1.0 - lambda * lambda * p1_ * p1_);
            case Form::tabulated:
                return std::abs(weighted_transform(lambda, 0.0));
            default: return 0.0;
        }
    }

    double mgf(const Vec2& lambda, int dim) const {
        if (form_ == Form::tensor) {
            double prod = 1.0;
            for (std::size_t a = 0; a < factors_.size(); ++a) prod *= factors_[a].mgf(lambda[a]);
            return prod;
        }
        if (dim != 1) throw std::invalid_argument("Kernel::mgf: 1D kernel in a 2D frame needs a tensor form");
        return mgf(lambda[0]);
    }

    /// log of mgf(lambda), kept in exponent space so callers can fold in
    /// external exponential prefactors before a single guarded exp.  The raw
    /// product exp(prefactor)*mgf(lambda) can pair an underflowed zero with an
    /// overflowed inf and produce NaN; summing exponents cannot.
    double log_mgf(double lambda) const {
        if (form_ == Form::tensor)
            throw std::invalid_argument("Kernel::log_mgf: vector argument required for tensor kernel");
        check_admissible(lambda);
        switch (form_) {
            case Form::gaussian:
                return std::log(mass_) - lambda * p0_ + 0.5 * lambda * lambda * p1_;
            case Form::uniform:
                return std::log(mass_) - lambda * p0_ +
                       detail::log_em1_ratio(lambda * (p1_ - p0_));
            case Form::laplace:
                return std::log(mass_) - lambda * p0_ -
                       std::log1p(-lambda * lambda * p1_ * p1_);
            case Form::tabulated: {
                // per-cell closed-form integrals with the cell base exponent
                // factored out, combined by log-sum-exp
                const std::size_t n = tab_.size();
                double best = -inf;
                std::vector<double> le;
                le.reserve(n);
                for (std::size_t i = 0; i + 1 < n; ++i) {
                    double y0 = tab_lo_ + tab_dx_ * static_cast<double>(i);
                    double f0 = tab_[i], f1 = tab_[i + 1];
                    double d;
                    if (std::abs(lambda) * tab_dx_ < 1e-10) {
                        d = 0.5 * tab_dx_ * (f0 + f1) * std::exp(-lambda * 0.5 * tab_dx_);
                    } else {
                        double e1 = std::exp(-lambda * tab_dx_);
                        double j0 = (1.0 - e1) / lambda;
                        double j1 = (j0 - tab_dx_ * e1) / lambda;
                        d = f0 * j0 + (f1 - f0) / tab_dx_ * j1;
                    }
                    if (d <= 0.0) continue;
                    double l = -lambda * y0 + std::log(d);
                    le.push_back(l);
                    best = std::max(best, l);
                }
                if (le.empty()) return -inf;
                double acc = 0.0;
                for (double l : le) acc += std::exp(l - best);
                return best + std::log(acc);
            }
            default: return -inf;
        }
    }

    double log_mgf(const Vec2& lambda, int dim) const {
        if (form_ == Form::tensor) {
            double sum = 0.0;
            for (std::size_t a = 0; a < factors_.size(); ++a) sum += factors_[a].log_mgf(lambda[a]);
            return sum;
        }
        if (dim != 1)
            throw std::invalid_argument("Kernel::log_mgf: 1D kernel in a 2D frame needs a tensor form");
        return log_mgf(lambda[0]);
    }

    /// |Fourier transform of exp(-lambda*y)K(y)| at frequency zeta, with the
    /// (2*pi)^-d transform normalization, so the value at zeta=0 is
    /// mgf(lambda)/(2*pi)^d.
    double weighted_fourier_magnitude(double lambda, double zeta) const {
        if (form_ == Form::tensor)
            throw std::invalid_argument("Kernel::weighted_fourier_magnitude: vector arguments required");
        check_admissible(lambda);
        return std::abs(weighted_transform(lambda, zeta)) / (2.0 * pi);
    }

    double weighted_fourier_magnitude(const Vec2& lambda, const Vec2& zeta, int dim) const {
        if (form_ == Form::tensor) {
            double prod = 1.0;
            for (std::size_t a = 0; a < factors_.size(); ++a)
                prod *= factors_[a].weighted_fourier_magnitude(lambda[a], zeta[a]);
            return prod;
        }
        if (dim != 1)
            throw std::invalid_argument("Kernel::weighted_fourier_magnitude: 2D frame needs a tensor form");
        return weighted_fourier_magnitude(lambda[0], zeta[0]);
    }

    /// Mass beyond the point a on the given side (1D forms only).
    double tail_mass(double a, Side side) const {
        switch (form_) {
            case Form::gaussian: {
                double t = (a - p0_) / std::sqrt(2.0 * p1_);
                return side == Side::right ? 0.5 * mass_ * std::erfc(t) : 0.5 * mass_ * std::erfc(-t);
            }
            case Form::uniform: {
                double clamped = std::min(std::max(a, p0_), p1_);
                double right = mass_ * (p1_ - clamped) / (p1_ - p0_);
                return side == Side::right ? right : mass_ - right;
            }
            case Form::laplace: {
                double right = a >= p0_ ? 0.5 * mass_ * std::exp(-(a - p0_) / p1_)
                                        : mass_ - 0.5 * mass_ * std::exp(-(p0_ - a) / p1_);
                return side == Side::right ? right : mass_ - right;
            }
            case Form::tabulated: {
                double right = tab_tail_right(a);
                return side == Side::right ? right : tab_total() - right;
            }
            case Form::tensor:
                throw std::invalid_argument("Kernel::tail_mass: 1D kernel required");
        }
        return 0.0;
    }

    /// Smallest x with tail_mass(x, side) <= tau (right side; mirrored for
    /// left).  tau == 0 is allowed only for compactly supported forms.
    double tail_quantile(double tau, Side side) const {
        if (form_ == Form::tensor) throw std::invalid_argument("Kernel::tail_quantile: 1D kernel required");
        if (!(tau >= 0) || tau >= mass_)
            throw std::domain_error("Kernel::tail_quantile: level " + fmt_double(tau) +
                                    " outside reachable range [0, " + fmt_double(mass_) + ")");
        auto [slo, shi] = finite_support_hint();
        if (tau == 0.0) {
            if (form_ == Form::uniform || form_ == Form::tabulated)
                return side == Side::right ? shi : slo;
            throw std::domain_error("Kernel::tail_quantile: zero level needs compact support");
        }
        // tail_mass(., right) decreases from mass to 0; bracket then bisect.
        auto f = [&](double x) { return tail_mass(x, side) - tau; };
        double lo = slo, hi = shi;
        if (side == Side::right) {
            while (f(lo) < 0) lo -= std::max(1.0, hi - lo);
            while (f(hi) > 0) hi += std::max(1.0, hi - lo);
            return bisect([&](double x) { return -f(x); }, lo, hi, {1e-13, 0.0, 300});
        }
        while (f(hi) < 0) hi += std::max(1.0, hi - lo);
        while (f(lo) > 0) lo -= std::max(1.0, hi - lo);
        return bisect([&](double x) { return f(x); }, lo, hi, {1e-13, 0.0, 300});
    }

    /// Interval holding all but eps of the mass on each side.
    std::pair<double, double> support_interval(double eps) const {
        if (form_ == Form::uniform) return {p0_, p1_};
        if (form_ == Form::tabulated)
            return {tab_lo_, tab_lo_ + tab_dx_ * (static_cast<double>(tab_.size()) - 1)};
        return {tail_quantile(eps, Side::left), tail_quantile(eps, Side::right)};
    }

    /// Translate the density: K'(y) = K(y - s).
    Kernel shifted(double s) const {
        switch (form_) {
            case Form::gaussian: return gaussian(p0_ + s, p1_, mass_);
            case Form::uniform: return uniform(p0_ + s, p1_ + s, mass_);
            case Form::laplace: return laplace(p0_ + s, p1_, mass_);
            case Form::tabulated: {
                std::vector<double> copy(tab_);
                return tabulated(tab_lo_ + s, tab_dx_, std::move(copy), mass_);
            }
            case Form::tensor:
                throw std::invalid_argument("Kernel::shifted: shift tensor factors individually");
        }
        throw std::logic_error("Kernel::shifted: unreachable");
    }

    Kernel reflected() const {
        switch (form_) {
            case Form::gaussian: return gaussian(-p0_, p1_, mass_);
            case Form::uniform: return uniform(-p1_, -p0_, mass_);
            case Form::laplace: return laplace(-p0_, p1_, mass_);
            case Form::tabulated: {
                std::vector<double> rev(tab_.rbegin(), tab_.rend());
                double hi = tab_lo_ + tab_dx_ * (static_cast<double>(tab_.size()) - 1);
                return tabulated(-hi, tab_dx_, std::move(rev), mass_);
            }
            case Form::tensor: {
                std::vector<Kernel> refl;
                refl.reserve(factors_.size());
                for (const auto& f : factors_) refl.push_back(f.reflected());
                return tensor_product(std::move(refl));
            }
        }
        throw std::logic_error("Kernel::reflected: unreachable");
    }

    /// Unit-mass-preserving spatial dilation: K'(w) = K(w/f)/f per axis.
    Kernel rescaled_space(double f) const {
        if (!(f > 0)) throw std::invalid_argument("Kernel::rescaled_space: factor must be > 0");
        switch (form_) {
            case Form::gaussian: return gaussian(p0_ * f, p1_ * f * f, mass_);
            case Form::uniform: return uniform(p0_ * f, p1_ * f, mass_);
            case Form::laplace: return laplace(p0_ * f, p1_ * f, mass_);
            case Form::tabulated: {
                std::vector<double> scaled(tab_);
                for (double& d : scaled) d /= f;
                return tabulated(tab_lo_ * f, tab_dx_ * f, std::move(scaled), mass_);
            }
            case Form::tensor: {
                std::vector<Kernel> fs;
                fs.reserve(factors_.size());
                for (const auto& fac : factors_) fs.push_back(fac.rescaled_space(f));
                return tensor_product(std::move(fs));
            }
        }
        throw std::logic_error("Kernel::rescaled_space: unreachable");
    }

private:
    Kernel(Form f, double mass) : form_(f), mass_(mass) {}

    static void require_mass(double mass) {
        if (!(mass > 0) || !std::isfinite(mass))
            throw std::invalid_argument("Kernel: mass must be finite and > 0");
    }

    void check_admissible(double lambda) const {
        auto [a, b] = admissible_window(0);
        if (!(lambda > a && lambda < b))
            throw std::domain_error("Kernel: decay parameter " + fmt_double(lambda) +
                                    " outside admissible window (" + fmt_double(a) + ", " +
                                    fmt_double(b) + ")");
        if (form_ == Form::tabulated && std::abs(lambda) * tab_dx_ > 0.5)
            throw std::domain_error("Kernel: tabulated spacing " + fmt_double(tab_dx_) +
                                    " cannot resolve decay weight with parameter " + fmt_double(lambda));
    }

    /// integral of exp(-s*y) K(y) dy for s = lambda + i*zeta (no 2*pi factor).
    cplx weighted_transform(double lambda, double zeta) const {
        const cplx s(lambda, zeta);
        switch (form_) {
            case Form::gaussian:
                return mass_ * std::exp(-s * p0_ + 0.5 * s * s * p1_);
            case Form::uniform: {
                cplx w = s * (p1_ - p0_);
                if (std::abs(w) < 1e-14) return cplx(mass_, 0.0) * std::exp(-s * p0_);
                return mass_ * std::exp(-s * p0_) * (-detail::cexpm1(-w)) / w;
            }
            case Form::laplace:
                return mass_ * std::exp(-s * p0_) / (1.0 - s * s * p1_ * p1_);
            case Form::tabulated: {
                // exact integral of the linear interpolant against exp(-s*y)
                cplx total = 0.0;
                const std::size_t n = tab_.size();
                for (std::size_t i = 0; i + 1 < n; ++i) {
                    double y0 = tab_lo_ + tab_dx_ * static_cast<double>(i);
                    double y1 = y0 + tab_dx_;
                    double f0 = tab_[i], f1 = tab_[i + 1];
                    if (std::abs(s) * tab_dx_ < 1e-10) {
                        total += 0.5 * tab_dx_ * (f0 + f1) * std::exp(-s * (0.5 * (y0 + y1)));
                        continue;
                    }
                    cplx e0 = std::exp(-s * y0), e1 = std::exp(-s * y1);
                    cplx i0 = (e0 - e1) / s;                       // int exp(-s y)
                    cplx i1 = (i0 - tab_dx_ * e1) / s;             // int (y - y0) exp(-s y)
                    total += f0 * i0 + (f1 - f0) / tab_dx_ * i1;
                }
                return total;
            }
            case Form::tensor:
                throw std::invalid_argument("Kernel: scalar transform on tensor kernel");
        }
        return 0.0;
    }

    double tab_total() const {
        double t = 0;
        for (std::size_t i = 0; i + 1 < tab_.size(); ++i) t += 0.5 * tab_dx_ * (tab_[i] + tab_[i + 1]);
        return t;
    }

    double tab_tail_right(double a) const {
        const std::size_t n = tab_.size();
        double hi = tab_lo_ + tab_dx_ * (static_cast<double>(n) - 1);
        if (a <= tab_lo_) return tab_total();
        if (a >= hi) return 0.0;
        double total = 0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            double y0 = tab_lo_ + tab_dx_ * static_cast<double>(i);
            double y1 = y0 + tab_dx_;
            if (y1 <= a) continue;
            double f0 = tab_[i], f1 = tab_[i + 1];
            if (y0 >= a) {
                total += 0.5 * tab_dx_ * (f0 + f1);
            } else {
                // partial cell [a, y1] of the linear interpolant
                double fa = f0 + (f1 - f0) * (a - y0) / tab_dx_;
                total += 0.5 * (y1 - a) * (fa + f1);
            }
        }
        return total;
    }

    std::pair<double, double> finite_support_hint() const {
        switch (form_) {
            case Form::gaussian: return {p0_ - std::sqrt(p1_), p0_ + std::sqrt(p1_)};
            case Form::uniform: return {p0_, p1_};
            case Form::laplace: return {p0_ - p1_, p0_ + p1_};
            case Form::tabulated:
                return {tab_lo_, tab_lo_ + tab_dx_ * (static_cast<double>(tab_.size()) - 1)};
            default: return {-1.0, 1.0};
        }
    }

    Form form_;
    double mass_;
    double p0_ = 0.0, p1_ = 1.0;
    double tab_lo_ = 0.0, tab_dx_ = 0.0;
    std::vector<double> tab_;
    std::vector<Kernel> factors_;
};

/// Node samples of a 1D kernel on a uniform axis, rescaled so the discrete sum
/// times spacing reproduces the kernel mass exactly.
struct KernelSamples {
    std::vector<double> values;
    double renorm = 1.0;          // factor applied to the raw density samples
    double tail_outside = 0.0;    // analytic mass beyond the sampled window
};

inline KernelSamples sample(const Kernel& k, const Axis& axis,
                            double tail_tol = 1e-8, bool enforce_tail = true) {
    if (k.dim() != 1) throw std::invalid_argument("sample: 1D kernel required (sample factors separately)");
    KernelSamples out;
    out.values.resize(static_cast<std::size_t>(axis.n));
    double sum = 0;
    for (int i = 0; i < axis.n; ++i) {
        double d = k.density(axis.coord(i));
        out.values[static_cast<std::size_t>(i)] = d;
        sum += d;
    }
    out.tail_outside = k.tail_mass(axis.lo - 0.5 * axis.dx, Side::left) +
                       k.tail_mass(axis.hi() + 0.5 * axis.dx, Side::right);
    if (enforce_tail && out.tail_outside > tail_tol * std::max(1.0, k.mass()))
        throw std::runtime_error("sample: grid truncates kernel mass " + fmt_double(out.tail_outside) +
                                 " (window [" + fmt_double(axis.lo) + ", " + fmt_double(axis.hi()) + "])");
    if (!(sum > 0)) throw std::runtime_error("sample: kernel vanishes on the grid");
    out.renorm = k.mass() / (sum * axis.dx);
    for (double& d : out.values) d *= out.renorm;
    return out;
}

/// Field of kernel samples on a full grid (tensor product for 2D).
inline Field sample_on_grid(const Kernel& k, const Grid& g) {
    Field f(g);
    if (g.dim == 1) {
        auto s = sample(k, g.ax[0]);
        f.v = std::move(s.values);
        return f;
    }
    auto sx = sample(k.factor(0), g.ax[0]);
    auto sy = sample(k.factor(1), g.ax[1]);
    for (int j = 0; j < g.ax[1].n; ++j)
        for (int i = 0; i < g.ax[0].n; ++i)
            f.at(i, j) = sx.values[static_cast<std::size_t>(i)] * sy.values[static_cast<std::size_t>(j)];
    return f;
}

}  // namespace semiwave
