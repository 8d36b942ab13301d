#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "numerics.hpp"

namespace semiwave {

using cplx = std::complex<double>;

/// Iterative radix-2 FFT with cached twiddles; sizes must be powers of two.
class FftPlan {
public:
    FftPlan() = default;  // empty plan; assign a real one before use
    explicit FftPlan(std::size_t n) : n_(n) {
        if (n == 0 || (n & (n - 1)) != 0)
            throw std::invalid_argument("FftPlan: size must be a power of two");
        rev_.resize(n);
        std::size_t log2n = 0;
        while ((std::size_t{1} << log2n) < n) ++log2n;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < log2n; ++b)
                if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (log2n - 1 - b);
            rev_[i] = r;
        }
        tw_.resize(n / 2);
        for (std::size_t k = 0; k < n / 2; ++k) {
            double ang = -2.0 * pi * static_cast<double>(k) / static_cast<double>(n);
            tw_[k] = {std::cos(ang), std::sin(ang)};
        }
    }

    std::size_t size() const { return n_; }

    void forward(std::vector<cplx>& a) const { run(a, false); }
    void inverse(std::vector<cplx>& a) const {
        run(a, true);
        const double s = 1.0 / static_cast<double>(n_);
        for (auto& z : a) z *= s;
    }

private:
    void run(std::vector<cplx>& a, bool inv) const {
        if (a.size() != n_) throw std::invalid_argument("FftPlan: buffer size mismatch");
        for (std::size_t i = 0; i < n_; ++i)
            if (i < rev_[i]) std::swap(a[i], a[rev_[i]]);
        for (std::size_t len = 2; len <= n_; len <<= 1) {
            std::size_t half = len >> 1;
            std::size_t stride = n_ / len;
            for (std::size_t start = 0; start < n_; start += len) {
                for (std::size_t k = 0; k < half; ++k) {
                    cplx w = tw_[k * stride];
                    if (inv) w = std::conj(w);
                    cplx u = a[start + k];
                    cplx v = a[start + k + half] * w;
                    a[start + k] = u + v;
                    a[start + k + half] = u - v;
                }
            }
        }
    }

    std::size_t n_ = 0;
    std::vector<std::size_t> rev_;
    std::vector<cplx> tw_;
};

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace semiwave
