#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fft.hpp"
#include "grid.hpp"
#include "kernel.hpp"
#include "numerics.hpp"
#include "spectral.hpp"

namespace semiwave {

// ---------------------------------------------------------------------------
// discrete interaction taps
//
// The delayed coupling in the moving frame reads the solution at x - y - c h nu
// against the kernel density in y.  Substituting w = y + c h nu turns that into
// an ordinary convolution with the density translated by the drift distance, so
// the grid weights are samples of the translated density times the cell width.

struct TapSet {
    int m_lo = 0;             // offset (in cells) of w.front()
    std::vector<double> w;    // quadrature weight per offset, cell width included

    int m_hi() const { return m_lo + static_cast<int>(w.size()) - 1; }
    double sum() const {
        double s = 0.0;
        for (double v : w) s += v;
        return s;
    }
};

/// Sample a 1D kernel translated by `shift` onto cell offsets of spacing `dz`.
/// The weights are renormalized so they sum to the kernel mass exactly; a
/// spatially constant state therefore feeds back through the taps with no
/// discretization drift.
inline TapSet make_taps(const Kernel& k1d, double shift, double dz, double tail_tol = 1e-10) {
    if (!(dz > 0)) throw std::invalid_argument("make_taps: dz must be positive");
    Kernel moved = k1d.shifted(shift);
    auto [slo, shi] = moved.support_interval(std::min(tail_tol * 0.1, 1e-12));
    int m_lo = static_cast<int>(std::floor(slo / dz)) - 1;
    int m_hi = static_cast<int>(std::ceil(shi / dz)) + 1;
    Axis ax{m_lo * dz, dz, m_hi - m_lo + 1};
    KernelSamples s = sample(moved, ax, tail_tol, true);
    TapSet t;
    t.m_lo = m_lo;
    t.w.resize(s.values.size());
    for (std::size_t i = 0; i < s.values.size(); ++i) t.w[i] = s.values[i] * dz;
    return t;
}

// ---------------------------------------------------------------------------
// line convolution with explicit edge extension
//
// Out-of-range reads use the line's edge policy: a constant fill value or the
// replicated endpoint.  The FFT path embeds those extension values into the
// padding slots of a circular convolution, which makes it equal to the direct
// sum node for node (up to roundoff), not just asymptotically.

namespace detail {

class LineConv {
  public:
    LineConv() = default;
    LineConv(TapSet taps, int n, double dx, bool use_fft)
        : taps_(std::move(taps)), n_(n), dx_(dx), fft_(use_fft) {
        left_depth_ = std::max(0, taps_.m_hi());
        right_depth_ = std::max(0, -taps_.m_lo);
        if (fft_) {
            npad_ = next_pow2(static_cast<std::size_t>(n_ + left_depth_ + right_depth_));
            plan_ = FftPlan(npad_);
            tap_hat_.assign(npad_, cplx(0.0, 0.0));
            for (std::size_t j = 0; j < taps_.w.size(); ++j) {
                int m = taps_.m_lo + static_cast<int>(j);
                std::size_t slot = static_cast<std::size_t>((m % static_cast<int>(npad_) +
                                                             static_cast<int>(npad_)) %
                                                            static_cast<int>(npad_));
                tap_hat_[slot] += taps_.w[j];
            }
            plan_.forward(tap_hat_);
            buf_.assign(npad_, cplx(0.0, 0.0));
        }
    }

    int n() const { return n_; }

    /// out[i] = sum_m w[m] x(i - m), x extended per edge policy.  The pads are
    /// materialized once per call so the direct sum and the FFT embedding read
    /// bit-identical extension values.
    void apply(const double* x, double* out, Edge lo, Edge hi) const {
        padl_.resize(static_cast<std::size_t>(left_depth_));
        padr_.resize(static_cast<std::size_t>(right_depth_));
        for (int d = 0; d < left_depth_; ++d)
            padl_[static_cast<std::size_t>(d)] = lo.extend(x[0], (d + 1) * dx_);
        for (int d = 0; d < right_depth_; ++d)
            padr_[static_cast<std::size_t>(d)] = hi.extend(x[n_ - 1], (d + 1) * dx_);
        if (!fft_) {
            for (int i = 0; i < n_; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < taps_.w.size(); ++j) {
                    int k = i - (taps_.m_lo + static_cast<int>(j));
                    double xv = k < 0   ? padl_[static_cast<std::size_t>(-k - 1)]
                                : k >= n_ ? padr_[static_cast<std::size_t>(k - n_)]
                                          : x[k];
                    acc += taps_.w[j] * xv;
                }
                out[i] = acc;
            }
            return;
        }
        for (std::size_t i = 0; i < npad_; ++i) buf_[i] = cplx(0.0, 0.0);
        for (int i = 0; i < n_; ++i) buf_[static_cast<std::size_t>(i)] = x[i];
        for (int d = 0; d < right_depth_; ++d)
            buf_[static_cast<std::size_t>(n_ + d)] = padr_[static_cast<std::size_t>(d)];
        for (int d = 0; d < left_depth_; ++d)
            buf_[npad_ - 1 - static_cast<std::size_t>(d)] = padl_[static_cast<std::size_t>(d)];
        plan_.forward(buf_);
        for (std::size_t i = 0; i < npad_; ++i) buf_[i] *= tap_hat_[i];
        plan_.inverse(buf_);
        for (int i = 0; i < n_; ++i) out[i] = buf_[static_cast<std::size_t>(i)].real();
    }

    const TapSet& taps() const { return taps_; }

  private:
    TapSet taps_;
    int n_ = 0;
    double dx_ = 1.0;
    bool fft_ = false;
    int left_depth_ = 0, right_depth_ = 0;
    std::size_t npad_ = 0;
    FftPlan plan_;
    mutable std::vector<cplx> tap_hat_;
    mutable std::vector<cplx> buf_;
    mutable std::vector<double> padl_, padr_;
};

}  // namespace detail

/// Non-local coupling operator on a grid: per-axis tap convolutions composed
/// axis 0 first, then axis 1.  Planar kernels must be tensor products.  Fill
/// values for the extension are supplied per apply so the caller can extend
/// with the image of the edge state under its reaction map.
class Convolver {
  public:
    Convolver() = default;

    Convolver(const Grid& g, const FrameSpec& fs, double twist, bool use_fft,
              double tail_tol = 1e-10)
        : dim_(g.dim) {
        for (int a = 0; a < dim_; ++a) {
            Kernel factor = dim_ == 1 ? fs.kernel : fs.kernel.factor(a);
            double shift = fs.speed * fs.delay * fs.direction[a];
            TapSet taps = make_taps(factor, shift, g.ax[a].dx, tail_tol);
            double t_a = twist * fs.direction[a];
            if (t_a != 0.0) {
                for (std::size_t j = 0; j < taps.w.size(); ++j) {
                    int m = taps.m_lo + static_cast<int>(j);
                    taps.w[j] *= std::exp(-t_a * m * g.ax[a].dx);
                }
            }
            line_[a] = detail::LineConv(std::move(taps), g.ax[a].n, g.ax[a].dx, use_fft);
        }
    }

    const TapSet& taps(int axis) const { return line_[axis].taps(); }

    /// The caller supplies the image of each fill/decay edge level under its
    /// reaction map; decay edges keep their rate and relax toward that image,
    /// which matches the linearized tail of the mapped state.
    static Edge mapped_edge(Edge e, double image) {
        if (e.mode == EdgeMode::replicate) return e;
        e.value = image;
        return e;
    }

    void apply(const Field& in, Field& out, std::array<double, 2> lo_fill,
               std::array<double, 2> hi_fill) const {
        const Grid& g = in.grid;
        Edge lo0 = mapped_edge(g.lo_edge[0], lo_fill[0]);
        Edge hi0 = mapped_edge(g.hi_edge[0], hi_fill[0]);
        if (dim_ == 1) {
            line_[0].apply(in.v.data(), out.v.data(), lo0, hi0);
            return;
        }
        const int nx = g.ax[0].n, ny = g.ax[1].n;
        for (int j = 0; j < ny; ++j)
            line_[0].apply(in.v.data() + static_cast<std::size_t>(j) * nx,
                           out.v.data() + static_cast<std::size_t>(j) * nx, lo0, hi0);
        Edge lo1 = mapped_edge(g.lo_edge[1], lo_fill[1]);
        Edge hi1 = mapped_edge(g.hi_edge[1], hi_fill[1]);
        std::vector<double> colin(static_cast<std::size_t>(ny)), colout(static_cast<std::size_t>(ny));
        for (int i = 0; i < nx; ++i) {
            for (int j = 0; j < ny; ++j)
                colin[static_cast<std::size_t>(j)] = out.v[static_cast<std::size_t>(j) * nx + i];
            line_[1].apply(colin.data(), colout.data(), lo1, hi1);
            for (int j = 0; j < ny; ++j)
                out.v[static_cast<std::size_t>(j) * nx + i] = colout[static_cast<std::size_t>(j)];
        }
    }

  private:
    int dim_ = 1;
    detail::LineConv line_[2];
};

// ---------------------------------------------------------------------------
// time stepping

struct EvolveOptions {
    double dt = 0.0;            // required; must divide the delay exactly
    bool use_fft = true;
    double weight_twist = 0.0;  // lambda of an exponentially weighted variable
    double blowup_guard = 1e6;
    double tap_tail_tol = 1e-10;
};

/// Semi-implicit integrator for the delayed non-local reaction-diffusion flow
/// in a frame moving with constant speed.  Diffusion, drift, and the linear
/// decay are treated by a trapezoidal implicit step (one tridiagonal solve per
/// axis; two alternating sweeps in 2D); the delayed coupling is known data by
/// the time it is needed and enters as a time-centered explicit source.
///
/// A nonzero weight_twist integrates the conjugated system satisfied by
/// exp(-lambda nu.x) u: off-diagonal stencil entries and tap weights pick up
/// the corresponding exponential factors, keeping the discrete comparison
/// structure (nonnegative off-diagonal entries, nonnegative taps) intact.
class Evolution {
  public:
    Evolution(const Grid& grid, const FrameSpec& fs, std::function<double(double)> reaction,
              const DelayHistory& history, EvolveOptions opt)
        : grid_(grid), fs_(fs), g_(std::move(reaction)), opt_(opt) {
        if (grid_.dim != fs_.dim) throw std::invalid_argument("Evolution: grid/frame dim mismatch");
        if (!(opt_.dt > 0)) throw std::invalid_argument("Evolution: dt must be positive");
        double ratio = fs_.delay / opt_.dt;
        sdel_ = static_cast<int>(std::round(ratio));
        if (sdel_ < 1 || std::abs(ratio - sdel_) > 1e-9 * ratio)
            throw std::invalid_argument("Evolution: dt must divide the delay exactly");
        if (history.steps() != sdel_ || std::abs(history.dt - opt_.dt) > 1e-12 * opt_.dt)
            throw std::invalid_argument("Evolution: history slots do not match dt");
        for (const Field& f : history.slots)
            if (!grid_.same_layout(f.grid))
                throw std::invalid_argument("Evolution: history grid layout mismatch");

        conv_ = Convolver(grid_, fs_, opt_.weight_twist, opt_.use_fft, opt_.tap_tail_tol);
        build_stencils();

        ring_ = history.slots;  // oldest first; head_ = newest
        head_ = static_cast<int>(ring_.size()) - 1;
        t_ = 0.0;

        scratch_.assign(grid_.size(), 0.0);
        conv_prev_ = Field(grid_);
        conv_next_ = Field(grid_);
        gtmp_ = Field(grid_);
        apply_reaction_conv(lagged(sdel_), conv_prev_);
    }

    double time() const { return t_; }
    double dt() const { return opt_.dt; }
    int steps_per_delay() const { return sdel_; }
    const Grid& grid() const { return grid_; }
    const FrameSpec& frame() const { return fs_; }
    const Convolver& convolver() const { return conv_; }

    /// Retune the frame speed in place, keeping the state and delay history.
    /// Stencils, taps, and the cached delayed coupling are rebuilt.  Used by
    /// relaxation drivers that absorb a measured front drift into the speed.
    void reframe(double speed) {
        if (speed == fs_.speed) return;
        fs_.speed = speed;
        conv_ = Convolver(grid_, fs_, opt_.weight_twist, opt_.use_fft, opt_.tap_tail_tol);
        build_stencils();
        apply_reaction_conv(lagged(sdel_), conv_prev_);
    }

    const Field& state() const { return ring_[static_cast<std::size_t>(head_)]; }

    /// Solution k steps in the past, 0 <= k <= steps_per_delay().
    const Field& lagged(int k) const {
        int sz = static_cast<int>(ring_.size());
        if (k < 0 || k >= sz) throw std::out_of_range("Evolution::lagged");
        return ring_[static_cast<std::size_t>(((head_ - k) % sz + sz) % sz)];
    }

    /// Snapshot of the last delay window, oldest slot first.
    DelayHistory history() const {
        DelayHistory h;
        h.dt = opt_.dt;
        h.slots.reserve(ring_.size());
        for (int k = sdel_; k >= 0; --k) h.slots.push_back(lagged(k));
        return h;
    }

    void step() {
        const double a = 0.5 * opt_.dt;
        apply_reaction_conv(lagged(sdel_ - 1), conv_next_);  // solution at t + dt - delay

        const Field& u = state();
        Field rhs(grid_);
        rhs.v = u.v;
        if (grid_.dim == 1) {
            axis_accumulate(0, a, u, rhs);
            for (std::size_t i = 0; i < rhs.v.size(); ++i)
                rhs.v[i] += a * (conv_prev_.v[i] + conv_next_.v[i]);
            add_implicit_edge_terms(0, a, rhs);
            axis_solve(0, a, rhs);
            commit(std::move(rhs));
        } else {
            // alternating-direction sweep: implicit in the wave axis first,
            // then a correction solve in the transverse axis
            int wa = wave_axis(), tr = 1 - wa;
            axis_accumulate(wa, a, u, rhs);
            axis_accumulate(tr, opt_.dt, u, rhs);
            for (std::size_t i = 0; i < rhs.v.size(); ++i)
                rhs.v[i] += a * (conv_prev_.v[i] + conv_next_.v[i]);
            add_implicit_edge_terms(wa, a, rhs);
            axis_solve(wa, a, rhs);
            axis_accumulate(tr, -a, u, rhs);
            add_implicit_edge_terms(tr, a, rhs);
            axis_solve(tr, a, rhs);
            commit(std::move(rhs));
        }
    }

    /// Advance by k steps.
    void run(int k) {
        for (int i = 0; i < k; ++i) step();
    }

  private:
    struct Stencil {
        double sub = 0.0, diag = 0.0, sup = 0.0;
    };

    int wave_axis() const {
        return std::abs(std::abs(fs_.direction[0]) - 1.0) < 1e-12 ? 0 : 1;
    }

    void build_stencils() {
        for (int axis = 0; axis < grid_.dim; ++axis) {
            double d = grid_.ax[axis].dx;
            double adv = fs_.speed * fs_.direction[axis];
            Stencil s;
            s.sub = 1.0 / (d * d) + adv / (2.0 * d);
            s.sup = 1.0 / (d * d) - adv / (2.0 * d);
            // the unit decay lives on the wave axis so the transverse sweep
            // carries pure diffusion
            double decay = (grid_.dim == 1 || axis == wave_axis()) ? 1.0 : 0.0;
            s.diag = -2.0 / (d * d) - decay;
            double t_a = opt_.weight_twist * fs_.direction[axis];
            if (t_a != 0.0) {
                s.sub *= std::exp(-t_a * d);
                s.sup *= std::exp(+t_a * d);
            }
            st_[axis] = s;
        }
    }

    void apply_reaction_conv(const Field& delayed, Field& out) {
        for (std::size_t i = 0; i < delayed.v.size(); ++i) gtmp_.v[i] = g_(delayed.v[i]);
        std::array<double, 2> lo{0.0, 0.0}, hi{0.0, 0.0};
        for (int a = 0; a < grid_.dim; ++a) {
            lo[static_cast<std::size_t>(a)] = g_(grid_.lo_edge[a].value);
            hi[static_cast<std::size_t>(a)] = g_(grid_.hi_edge[a].value);
        }
        conv_.apply(gtmp_, out, lo, hi);
    }

    /// acc += w * A_axis(in) with edge extension from the grid policy.
    void axis_accumulate(int axis, double w, const Field& in, Field& acc) const {
        const Stencil& s = st_[axis];
        const int nx = grid_.ax[0].n;
        const int len = grid_.ax[axis].n;
        const int nlines = grid_.dim == 1 ? 1 : grid_.ax[1 - axis].n;
        const int stride = axis == 0 ? 1 : nx;
        for (int l = 0; l < nlines; ++l) {
            std::size_t base = axis == 0 ? static_cast<std::size_t>(l) * nx
                                         : static_cast<std::size_t>(l);
            auto X = [&](int i) { return in.v[base + static_cast<std::size_t>(i) * stride]; };
            double ghost_lo = grid_.lo_edge[axis].extend(X(0), grid_.ax[axis].dx);
            double ghost_hi = grid_.hi_edge[axis].extend(X(len - 1), grid_.ax[axis].dx);
            for (int i = 0; i < len; ++i) {
                double xm = i == 0 ? ghost_lo : X(i - 1);
                double xp = i == len - 1 ? ghost_hi : X(i + 1);
                acc.v[base + static_cast<std::size_t>(i) * stride] +=
                    w * (s.sub * xm + s.diag * X(i) + s.sup * xp);
            }
        }
    }

    /// The ghost value is an affine function of the boundary unknown,
    /// ghost = a + r * u_b: fill has (a, r) = (value, 0), replicate (0, 1),
    /// decay ((1 - r) * limit, e^{-rate dx}).  On the implicit side the
    /// constant part a lands on the rhs here; the proportional part r folds
    /// into the boundary diagonal in axis_solve.
    static std::pair<double, double> ghost_affine(const Edge& e, double dx) {
        switch (e.mode) {
            case EdgeMode::fill: return {e.value, 0.0};
            case EdgeMode::replicate: return {0.0, 1.0};
            default: {
                double r = std::exp(-e.rate * dx);
                return {(1.0 - r) * e.value, r};
            }
        }
    }

    void add_implicit_edge_terms(int axis, double w, Field& rhs) const {
        const Stencil& s = st_[axis];
        const int nx = grid_.ax[0].n;
        const int len = grid_.ax[axis].n;
        const int nlines = grid_.dim == 1 ? 1 : grid_.ax[1 - axis].n;
        const int stride = axis == 0 ? 1 : nx;
        double a_lo = ghost_affine(grid_.lo_edge[axis], grid_.ax[axis].dx).first;
        double a_hi = ghost_affine(grid_.hi_edge[axis], grid_.ax[axis].dx).first;
        if (a_lo == 0.0 && a_hi == 0.0) return;
        for (int l = 0; l < nlines; ++l) {
            std::size_t base = axis == 0 ? static_cast<std::size_t>(l) * nx
                                         : static_cast<std::size_t>(l);
            rhs.v[base] += w * s.sub * a_lo;
            rhs.v[base + static_cast<std::size_t>(len - 1) * stride] += w * s.sup * a_hi;
        }
    }

    /// Solve (I - w A_axis) x = rhs in place (Thomas sweeps per line).
    /// Replicate edges fold the ghost into the boundary diagonal.
    void axis_solve(int axis, double w, Field& rhs) const {
        const Stencil& s = st_[axis];
        const int nx = grid_.ax[0].n;
        const int len = grid_.ax[axis].n;
        const int nlines = grid_.dim == 1 ? 1 : grid_.ax[1 - axis].n;
        const int stride = axis == 0 ? 1 : nx;
        const double msub = -w * s.sub, mdiag = 1.0 - w * s.diag, msup = -w * s.sup;
        const double r_lo = ghost_affine(grid_.lo_edge[axis], grid_.ax[axis].dx).second;
        const double r_hi = ghost_affine(grid_.hi_edge[axis], grid_.ax[axis].dx).second;
        std::vector<double>& cp = scratch_;  // modified super-diagonal
        std::vector<double> dq(static_cast<std::size_t>(len));
        for (int l = 0; l < nlines; ++l) {
            std::size_t base = axis == 0 ? static_cast<std::size_t>(l) * nx
                                         : static_cast<std::size_t>(l);
            auto R = [&](int i) -> double& {
                return rhs.v[base + static_cast<std::size_t>(i) * stride];
            };
            double d0 = mdiag + r_lo * msub;
            double dn = mdiag + r_hi * msup;
            cp[0] = msup / d0;
            dq[0] = R(0) / d0;
            for (int i = 1; i < len; ++i) {
                double dii = i == len - 1 ? dn : mdiag;
                double denom = dii - msub * cp[static_cast<std::size_t>(i - 1)];
                cp[static_cast<std::size_t>(i)] = msup / denom;
                dq[static_cast<std::size_t>(i)] =
                    (R(i) - msub * dq[static_cast<std::size_t>(i - 1)]) / denom;
            }
            R(len - 1) = dq[static_cast<std::size_t>(len - 1)];
            for (int i = len - 2; i >= 0; --i)
                R(i) = dq[static_cast<std::size_t>(i)] - cp[static_cast<std::size_t>(i)] * R(i + 1);
        }
    }

    void commit(Field&& next) {
        double s = next.sup_abs();
        if (!(s <= opt_.blowup_guard)) {
            char msg[160];
            std::snprintf(msg, sizeof msg,
                          "Evolution: state norm %.3g exceeded guard %.3g at t=%.6g "
                          "(dt=%.3g, dx=%.3g); reduce dt",
                          s, opt_.blowup_guard, t_ + opt_.dt, opt_.dt, grid_.ax[0].dx);
            throw std::runtime_error(msg);
        }
        head_ = (head_ + 1) % static_cast<int>(ring_.size());
        ring_[static_cast<std::size_t>(head_)] = std::move(next);
        std::swap(conv_prev_.v, conv_next_.v);
        t_ += opt_.dt;
    }

    Grid grid_;
    FrameSpec fs_;
    std::function<double(double)> g_;
    EvolveOptions opt_;
    int sdel_ = 1;
    Convolver conv_;
    Stencil st_[2];
    std::vector<Field> ring_;
    int head_ = 0;
    double t_ = 0.0;
    Field conv_prev_, conv_next_, gtmp_;
    mutable std::vector<double> scratch_;
};

// ---------------------------------------------------------------------------
// probes and recorded runs

struct ProbeSpec {
    enum class Kind {
        sup_abs,       // max |u|
        min_value,     // min u
        max_value,     // max u
        weighted_sup,  // max |u| exp(-param * nu.x)
        weighted_l1,   // sum |u| exp(-param * nu.x) * cell volume
        level_inf,     // leftmost wave-axis crossing of u = param
        level_sup      // rightmost wave-axis crossing of u = param
    };
    Kind kind = Kind::sup_abs;
    double param = 0.0;

    std::string name() const {
        switch (kind) {
            case Kind::sup_abs: return "sup_abs";
            case Kind::min_value: return "min";
            case Kind::max_value: return "max";
            case Kind::weighted_sup: return "wsup:" + fmt_double(param);
            case Kind::weighted_l1: return "wl1:" + fmt_double(param);
            case Kind::level_inf: return "level_inf:" + fmt_double(param);
            case Kind::level_sup: return "level_sup:" + fmt_double(param);
        }
        return "probe";
    }
};

struct TimeSeries {
    std::vector<std::string> names;          // one per column
    std::vector<double> t;
    std::vector<std::vector<double>> cols;   // cols[c][k] sampled at t[k]

    const std::vector<double>& column(const std::string& n) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == n) return cols[i];
        throw std::out_of_range("TimeSeries: no column named " + n);
    }
};

namespace detail {

/// Reduce a planar field to its wave-axis profile by a transverse max.
inline void axis_profile(const Field& f, int wa, std::vector<double>& out) {
    const Grid& g = f.grid;
    if (g.dim == 1) {
        out.assign(f.v.begin(), f.v.end());
        return;
    }
    const int nx = g.ax[0].n, ny = g.ax[1].n;
    if (wa == 0) {
        out.assign(static_cast<std::size_t>(nx), -inf);
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                out[static_cast<std::size_t>(i)] =
                    std::max(out[static_cast<std::size_t>(i)],
                             f.v[static_cast<std::size_t>(j) * nx + i]);
    } else {
        out.assign(static_cast<std::size_t>(ny), -inf);
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                out[static_cast<std::size_t>(j)] =
                    std::max(out[static_cast<std::size_t>(j)],
                             f.v[static_cast<std::size_t>(j) * nx + i]);
    }
}

inline double level_crossing(const std::vector<double>& prof, const Axis& ax, double beta,
                             bool rightmost) {
    const int n = static_cast<int>(prof.size());
    if (!rightmost) {
        for (int i = 0; i < n; ++i) {
            if (prof[static_cast<std::size_t>(i)] >= beta) {
                if (i == 0) return ax.coord(0);
                double u0 = prof[static_cast<std::size_t>(i - 1)],
                       u1 = prof[static_cast<std::size_t>(i)];
                return ax.coord(i - 1) + ax.dx * (beta - u0) / (u1 - u0);
            }
        }
    } else {
        for (int i = n - 1; i >= 0; --i) {
            if (prof[static_cast<std::size_t>(i)] >= beta) {
                if (i == n - 1) return ax.coord(n - 1);
                double u0 = prof[static_cast<std::size_t>(i)],
                       u1 = prof[static_cast<std::size_t>(i + 1)];
                return ax.coord(i) + ax.dx * (beta - u0) / (u1 - u0);
            }
        }
    }
    return std::nan("");
}

}  // namespace detail

inline double eval_probe(const Evolution& ev, const ProbeSpec& p) {
    const Field& f = ev.state();
    const Grid& g = f.grid;
    const FrameSpec& fs = ev.frame();
    switch (p.kind) {
        case ProbeSpec::Kind::sup_abs: return f.sup_abs();
        case ProbeSpec::Kind::min_value: return f.min_value();
        case ProbeSpec::Kind::max_value: return f.max_value();
        case ProbeSpec::Kind::weighted_sup:
        case ProbeSpec::Kind::weighted_l1: {
            double acc = 0.0;
            double vol = g.ax[0].dx * (g.dim == 2 ? g.ax[1].dx : 1.0);
            const int nx = g.ax[0].n, ny = g.dim == 2 ? g.ax[1].n : 1;
            for (int j = 0; j < ny; ++j) {
                for (int i = 0; i < nx; ++i) {
                    double along = fs.direction[0] * g.ax[0].coord(i) +
                                   (g.dim == 2 ? fs.direction[1] * g.ax[1].coord(j) : 0.0);
                    double w = std::abs(f.v[static_cast<std::size_t>(j) * nx + i]) *
                               exp_guarded(-p.param * along);
                    if (p.kind == ProbeSpec::Kind::weighted_sup) acc = std::max(acc, w);
                    else acc += w * vol;
                }
            }
            return acc;
        }
        case ProbeSpec::Kind::level_inf:
        case ProbeSpec::Kind::level_sup: {
            int wa = g.dim == 1 ? 0
                                : (std::abs(std::abs(fs.direction[0]) - 1.0) < 1e-12 ? 0 : 1);
            std::vector<double> prof;
            detail::axis_profile(f, wa, prof);
            return detail::level_crossing(prof, g.ax[wa], p.param,
                                          p.kind == ProbeSpec::Kind::level_sup);
        }
    }
    return std::nan("");
}

/// Step to t_end, recording every `stride` steps (and at the start and end).
inline TimeSeries simulate(Evolution& ev, double t_end, int stride,
                           const std::vector<ProbeSpec>& probes) {
    if (stride < 1) throw std::invalid_argument("simulate: stride must be >= 1");
    TimeSeries out;
    for (const ProbeSpec& p : probes) out.names.push_back(p.name());
    out.cols.assign(probes.size(), {});
    auto record = [&] {
        out.t.push_back(ev.time());
        for (std::size_t c = 0; c < probes.size(); ++c)
            out.cols[c].push_back(eval_probe(ev, probes[c]));
    };
    record();
    long k = 0;
    while (ev.time() < t_end - 1e-12 * std::max(1.0, t_end)) {
        ev.step();
        if (++k % stride == 0) record();
    }
    if (k % stride != 0) record();
    return out;
}

// ---------------------------------------------------------------------------
// scalar delayed ODE (method of steps, classical fourth-order stages)

struct OdeTrace {
    std::vector<double> t, x;

    double back() const { return x.back(); }
};

/// x'(t) = f(x(t), x(t - delay)) for t > 0 with x = history on [-delay, 0].
/// dt must divide the delay; off-node history reads use cubic interpolation.
inline OdeTrace delay_ode(const std::function<double(double, double)>& f,
                          const std::function<double(double)>& history, double delay,
                          double t_end, double dt) {
    if (!(dt > 0) || !(delay > 0)) throw std::invalid_argument("delay_ode: dt, delay > 0");
    double ratio = delay / dt;
    int s = static_cast<int>(std::round(ratio));
    if (s < 1 || std::abs(ratio - s) > 1e-9 * ratio)
        throw std::invalid_argument("delay_ode: dt must divide the delay exactly");
    int total = static_cast<int>(std::ceil(t_end / dt - 1e-12));

    OdeTrace tr;
    tr.t.reserve(static_cast<std::size_t>(s + total + 1));
    tr.x.reserve(static_cast<std::size_t>(s + total + 1));
    for (int k = -s; k <= 0; ++k) {
        tr.t.push_back(k * dt);
        tr.x.push_back(history(k * dt));
    }
    // lagged read at absolute time tau <= current time, cubic in the stored nodes
    auto lag = [&](double tau) {
        double idx = (tau + s * dt) / dt;  // fractional node index
        int n = static_cast<int>(tr.x.size());
        long i = std::lround(idx);
        if (std::abs(idx - i) < 1e-9 && i >= 0 && i < n) return tr.x[static_cast<std::size_t>(i)];
        return interp_cubic(tr.x, tr.t.front(), dt, tau);
    };
    for (int k = 0; k < total; ++k) {
        double t0 = tr.t.back(), x0 = tr.x.back();
        double k1 = f(x0, lag(t0 - delay));
        double k2 = f(x0 + 0.5 * dt * k1, lag(t0 + 0.5 * dt - delay));
        double k3 = f(x0 + 0.5 * dt * k2, lag(t0 + 0.5 * dt - delay));
        double k4 = f(x0 + dt * k3, lag(t0 + dt - delay));
        tr.t.push_back(t0 + dt);
        tr.x.push_back(x0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    }
    return tr;
}

// ---------------------------------------------------------------------------
// grid dispersion
//
// Steady profiles of the discretized flow behave like exp(lambda z) where the
// grid characteristic function vanishes: second differences contribute
// 2(cosh(lambda dz) - 1)/dz^2, the centered drift term sinh(lambda dz)/dz, and
// the taps their own exponential sum.  Root seeding and critical-speed runs
// use these so the discrete and continuum objects agree at the grid's own
// resolution rather than chasing each other's truncation error.

inline double discrete_char_eval(const TapSet& taps, double dz, double c, double gprime0,
                                 double lambda) {
    double diff = 2.0 * (std::cosh(lambda * dz) - 1.0) / (dz * dz);
    double drift = c * std::sinh(lambda * dz) / dz;
    double q = 0.0;
    for (std::size_t j = 0; j < taps.w.size(); ++j) {
        int m = taps.m_lo + static_cast<int>(j);
        q += taps.w[j] * exp_guarded(-lambda * m * dz);
    }
    return diff - drift - 1.0 + gprime0 * q;
}

inline double discrete_char_eval(const FrameSpec& fs, double dz, double lambda) {
    TapSet taps = make_taps(fs.axis_kernel(), fs.speed * fs.delay, dz);
    return discrete_char_eval(taps, dz, fs.speed, fs.gprime0, lambda);
}

namespace detail {

inline std::pair<double, double> discrete_lambda_window(const FrameSpec& fs, double dz,
                                                        const TapSet& taps) {
    auto [wlo, whi] = fs.axis_kernel().admissible_window(0);
    double clip = std::abs(fs.speed) + 60.0;
    double ext = std::max(std::abs(taps.m_lo), std::abs(taps.m_hi())) * dz;
    clip = std::min(clip, 650.0 / std::max(ext, dz));
    double lo = std::max(wlo, -clip), hi = std::min(whi, clip);
    if (std::isfinite(wlo) || std::isfinite(whi)) {
        double w = hi - lo;
        lo += 1e-9 * w;
        hi -= 1e-9 * w;
    }
    return {lo, hi};
}

}  // namespace detail

/// Roots of the grid characteristic function at the frame's speed.  Same
/// convexity structure as the continuum version; same outputs.
inline CharRoots discrete_char_roots(const FrameSpec& fs, double dz) {
    TapSet taps = make_taps(fs.axis_kernel(), fs.speed * fs.delay, dz);
    auto [lo, hi] = detail::discrete_lambda_window(fs, dz, taps);
    auto E = [&](double lam) {
        return discrete_char_eval(taps, dz, fs.speed, fs.gprime0, lam);
    };
    const int n = 10000;
    double step = (hi - lo) / n;
    double fm = E(lo);
    std::vector<double> brackets;
    for (int i = 1; i <= n; ++i) {
        double fx = E(lo + step * i);
        if ((fm < 0) != (fx < 0)) brackets.push_back(lo + step * (i - 1));
        fm = fx;
    }
    CharRoots out;
    if (brackets.size() >= 2) {
        auto root_in = [&](double a, double b) {
            bool increasing = E(b) > E(a);
            return bisect([&](double t) { return increasing ? E(t) : -E(t); }, a, b,
                          {1e-13, 0.0, 200});
        };
        out.lambda1 = root_in(brackets.front(), brackets.front() + step);
        out.lambda2 = root_in(brackets.back(), brackets.back() + step);
    } else {
        double argmin = golden_min(E, lo, hi, 1e-12);
        double emin = E(argmin);
        double scale = 1.0 + std::abs(fs.gprime0);
        // the positive window absorbs the residual a polished threshold speed
        // may leave, so roots at that speed resolve as a tangency
        if (emin > 1e-10 * scale)
            throw std::domain_error("discrete_char_roots: no real roots at speed " +
                                    std::to_string(fs.speed));
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
    return out;
}

/// Smallest speed at which the grid characteristic function acquires a
/// positive real root (the grid analogue of the spreading threshold).
inline double discrete_critical_speed(const FrameSpec& tmpl, double dz) {
    auto min_pos = [&](double c) {
        FrameSpec f = tmpl;
        f.speed = c;
        TapSet taps = make_taps(f.axis_kernel(), c * f.delay, dz);
        auto [lo, hi] = detail::discrete_lambda_window(f, dz, taps);
        double a = std::max(lo, 1e-10);
        if (!(a < hi)) return inf;
        double arg = golden_min(
            [&](double lam) { return discrete_char_eval(taps, dz, f.speed, f.gprime0, lam); }, a,
            hi, 1e-10);
        return discrete_char_eval(taps, dz, f.speed, f.gprime0, arg);
    };
    double lo = -50.0, hi = 50.0;
    int grow = 0;
    while (min_pos(hi) > 0.0) {
        if (++grow > 3) throw std::runtime_error("discrete_critical_speed: no threshold below 400");
        lo = hi;
        hi *= 2.0;
    }
    grow = 0;
    while (min_pos(lo) <= 0.0) {
        if (++grow > 3) throw std::runtime_error("discrete_critical_speed: no threshold above -400");
        hi = lo;
        lo *= 2.0;
    }
    double c = bisect([&](double cc) { return -min_pos(cc); }, lo, hi, {1e-10, 0.0, 200});
    // Newton polish on the envelope c -> min E (numeric slope: the taps move
    // with the speed, so the analytic derivative is not worth the code).
    // Leaves the tangency residual far below the root finder's acceptance.
    for (int it = 0; it < 3; ++it) {
        double d = 1e-6 * (1.0 + std::abs(c));
        double slope = (min_pos(c + d) - min_pos(c - d)) / (2.0 * d);
        if (!std::isfinite(slope) || slope == 0.0) break;
        double next = c - min_pos(c) / slope;
        if (!std::isfinite(next) || std::abs(next - c) > 1e-3) break;
        c = next;
    }
    return c;
}

}  // namespace semiwave
