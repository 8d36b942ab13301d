#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "numerics.hpp"

namespace semiwave {

/// Uniform node axis: n nodes at lo, lo+dx, ..., lo+(n-1)*dx.
struct Axis {
    double lo = 0.0;
    double dx = 1.0;
    int n = 0;

    double hi() const { return lo + dx * (n - 1); }
    double coord(int i) const { return lo + dx * i; }

    static Axis from_extent(double lo, double hi, double dx) {
        if (!(hi > lo) || !(dx > 0)) throw std::invalid_argument("Axis: need hi > lo and dx > 0");
        double cells = (hi - lo) / dx;
        double rounded = std::round(cells);
        if (std::abs(cells - rounded) > 1e-9 * (1.0 + cells))
            throw std::invalid_argument("Axis: spacing does not divide extent (lo=" +
                                        fmt_double(lo) + ", hi=" + fmt_double(hi) +
                                        ", dx=" + fmt_double(dx) + ")");
        Axis a;
        a.lo = lo;
        a.dx = dx;
        a.n = static_cast<int>(rounded) + 1;
        return a;
    }
};

/// How a field continues past a domain edge: a constant value (the asymptotic
/// state on that side), replication of the edge value (zero normal gradient,
/// used on axes transverse to the wave direction), or exponential relaxation
/// toward a limit at a known outward rate.  The decay mode makes the edge
/// transparent to a front tail: on a truncated domain the inflow edge of the
/// moving frame would otherwise pump the constant state inward and wash the
/// tail away, so a profile that needs a slower-than-generic tail to hold its
/// speed slides off the grid instead of converging.
enum class EdgeMode { fill, replicate, decay };

struct Edge {
    EdgeMode mode = EdgeMode::fill;
    double value = 0.0;  // fill: held value; decay: the far limit
    double rate = 0.0;   // decay: outward e-folding rate, > 0

    static Edge fill(double v) { return {EdgeMode::fill, v, 0.0}; }
    static Edge replicate() { return {EdgeMode::replicate, 0.0, 0.0}; }
    static Edge decay(double rate, double limit = 0.0) {
        if (!(rate > 0)) throw std::invalid_argument("Edge::decay: rate must be positive");
        return {EdgeMode::decay, limit, rate};
    }

    /// Extension value at distance `dist` outward of the boundary sample.
    double extend(double boundary, double dist) const {
        switch (mode) {
            case EdgeMode::fill: return value;
            case EdgeMode::replicate: return boundary;
            default: return value + (boundary - value) * std::exp(-rate * dist);
        }
    }
};

struct Grid {
    int dim = 1;
    Axis ax[2] = {};
    Edge lo_edge[2] = {};
    Edge hi_edge[2] = {};

    std::size_t size() const {
        return dim == 1 ? static_cast<std::size_t>(ax[0].n)
                        : static_cast<std::size_t>(ax[0].n) * static_cast<std::size_t>(ax[1].n);
    }
    // axis-0 index varies fastest
    std::size_t index(int i, int j = 0) const {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(ax[0].n) +
               static_cast<std::size_t>(i);
    }

    static Grid line(double lo, double hi, double dx, Edge left, Edge right) {
        Grid g;
        g.dim = 1;
        g.ax[0] = Axis::from_extent(lo, hi, dx);
        g.lo_edge[0] = left;
        g.hi_edge[0] = right;
        return g;
    }

    static Grid plane(double x_lo, double x_hi, double dx, Edge x_left, Edge x_right,
                      double y_lo, double y_hi, double dy, Edge y_left, Edge y_right) {
        Grid g;
        g.dim = 2;
        g.ax[0] = Axis::from_extent(x_lo, x_hi, dx);
        g.ax[1] = Axis::from_extent(y_lo, y_hi, dy);
        g.lo_edge[0] = x_left;
        g.hi_edge[0] = x_right;
        g.lo_edge[1] = y_left;
        g.hi_edge[1] = y_right;
        return g;
    }

    bool same_layout(const Grid& o) const {
        if (dim != o.dim) return false;
        for (int a = 0; a < dim; ++a)
            if (ax[a].n != o.ax[a].n || std::abs(ax[a].lo - o.ax[a].lo) > 1e-12 ||
                std::abs(ax[a].dx - o.ax[a].dx) > 1e-15)
                return false;
        return true;
    }
};

struct Field {
    Grid grid;
    std::vector<double> v;

    Field() = default;
    explicit Field(const Grid& g, double init = 0.0) : grid(g), v(g.size(), init) {}

    double& at(int i, int j = 0) { return v[grid.index(i, j)]; }
    double at(int i, int j = 0) const { return v[grid.index(i, j)]; }

    double sup_abs() const {
        double m = 0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }
    double min_value() const {
        double m = inf;
        for (double x : v) m = std::min(m, x);
        return m;
    }
    double max_value() const {
        double m = -inf;
        for (double x : v) m = std::max(m, x);
        return m;
    }
};

/// Solution history over one delay interval: slots.size() == steps + 1 fields,
/// slot k at time offset (k - steps) * dt, so the last slot is "now".
struct DelayHistory {
    double dt = 0.0;
    std::vector<Field> slots;

    int steps() const { return static_cast<int>(slots.size()) - 1; }
    double delay() const { return dt * steps(); }

    static DelayHistory constant_in_time(const Field& f, double h, int steps) {
        if (steps < 1) throw std::invalid_argument("DelayHistory: need at least one step");
        DelayHistory d;
        d.dt = h / steps;
        d.slots.assign(static_cast<std::size_t>(steps) + 1, f);
        return d;
    }

    template <class F>  // F: double(double s, double z, double y), s in [-h, 0]
    static DelayHistory from_function(const Grid& g, double h, int steps, F&& f) {
        DelayHistory d;
        d.dt = h / steps;
        d.slots.reserve(steps + 1);
        for (int k = 0; k <= steps; ++k) {
            double s = (k - steps) * d.dt;
            Field fld(g);
            for (int j = 0; j < (g.dim == 2 ? g.ax[1].n : 1); ++j)
                for (int i = 0; i < g.ax[0].n; ++i)
                    fld.at(i, j) = f(s, g.ax[0].coord(i), g.dim == 2 ? g.ax[1].coord(j) : 0.0);
            d.slots.push_back(std::move(fld));
        }
        return d;
    }
};

}  // namespace semiwave
