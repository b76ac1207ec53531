#pragma once

#include "mfglab/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace mfglab {

enum class Boundary { no_flux, periodic };

inline std::string to_string(Boundary b) { return b == Boundary::periodic ? "periodic" : "no_flux"; }

/// Cell-centered uniform mesh on [x_min, x_max].
class Grid {
public:
    Grid(double x_min, double x_max, std::size_t n_cells, Boundary boundary = Boundary::no_flux)
        : x_min_(x_min), x_max_(x_max), n_(n_cells), boundary_(boundary)
    {
        if (!(std::isfinite(x_min) && std::isfinite(x_max)) || !(x_min < x_max)) {
            throw InvalidParameterError("Grid: x_min must be < x_max");
        }
        if (n_cells < 4) {
            throw GridTooSmallError("Grid: n_cells must be >= 4, got " + std::to_string(n_cells));
        }
        dx_ = (x_max - x_min) / static_cast<double>(n_cells);
    }

    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    double length() const { return x_max_ - x_min_; }
    std::size_t size() const { return n_; }
    double dx() const { return dx_; }
    Boundary boundary() const { return boundary_; }
    bool periodic() const { return boundary_ == Boundary::periodic; }

    double center(std::size_t i) const { return x_min_ + (static_cast<double>(i) + 0.5) * dx_; }

    std::vector<double> centers() const
    {
        std::vector<double> xs(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            xs[i] = center(i);
        }
        return xs;
    }

    /// Index of the cell containing x, clamped into [0, n-1].
    std::size_t cell_of(double x) const
    {
        const double s = std::floor((x - x_min_) / dx_);
        if (!(s > 0.0)) {
            return 0;
        }
        return std::min(static_cast<std::size_t>(s), n_ - 1);
    }

    bool operator==(const Grid& o) const
    {
        return x_min_ == o.x_min_ && x_max_ == o.x_max_ && n_ == o.n_ && boundary_ == o.boundary_;
    }

private:
    double x_min_;
    double x_max_;
    std::size_t n_;
    Boundary boundary_;
    double dx_;
};

/// Uniform partition of [0, T] into n_steps intervals.
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t n_steps) : T_(horizon), n_(n_steps)
    {
        if (!(std::isfinite(horizon) && horizon > 0.0)) {
            throw InvalidParameterError("TimeGrid: horizon T must be > 0");
        }
        dt_ = n_steps > 0 ? horizon / static_cast<double>(n_steps) : 0.0;
    }

    double horizon() const { return T_; }
    std::size_t steps() const { return n_; }
    double dt() const { return dt_; }

    double time(std::size_t n) const
    {
        return n == n_ ? T_ : static_cast<double>(n) * dt_;
    }

    bool operator==(const TimeGrid& o) const { return T_ == o.T_ && n_ == o.n_; }

private:
    double T_;
    std::size_t n_;
    double dt_;
};

/// One value per cell center.
using Field = std::vector<double>;

/// Frames indexed by time level; frame n lives at t_n.
class TrajectoryField {
public:
    TrajectoryField() = default;
    TrajectoryField(std::size_t n_frames, std::size_t n_cells, double value = 0.0)
        : frames_(n_frames, Field(n_cells, value))
    {
    }
    explicit TrajectoryField(std::vector<Field> frames) : frames_(std::move(frames)) {}

    std::size_t frames() const { return frames_.size(); }
    std::size_t cells() const { return frames_.empty() ? 0 : frames_.front().size(); }

    Field& operator[](std::size_t n) { return frames_[n]; }
    const Field& operator[](std::size_t n) const { return frames_[n]; }
    const Field& back() const { return frames_.back(); }
    void push_back(Field f) { frames_.push_back(std::move(f)); }

    auto begin() const { return frames_.begin(); }
    auto end() const { return frames_.end(); }

    const std::vector<Field>& data() const { return frames_; }

    /// Throws unless there are tg.steps()+1 frames of g.size() cells each.
    void require_shape(const Grid& g, const TimeGrid& tg, const char* what) const
    {
        if (frames_.size() != tg.steps() + 1) {
            throw DimensionError(std::string(what) + ": expected " + std::to_string(tg.steps() + 1) +
                                 " frames, got " + std::to_string(frames_.size()));
        }
        for (const auto& f : frames_) {
            if (f.size() != g.size()) {
                throw DimensionError(std::string(what) + ": frame length " + std::to_string(f.size()) +
                                     " does not match grid size " + std::to_string(g.size()));
            }
        }
    }

private:
    std::vector<Field> frames_;
};

inline void require_size(std::span<const double> f, const Grid& g, const char* what)
{
    if (f.size() != g.size()) {
        throw DimensionError(std::string(what) + ": field length " + std::to_string(f.size()) +
                             " does not match grid size " + std::to_string(g.size()));
    }
}

/// Samples fn at every cell center.
inline Field sample(const Grid& g, const std::function<double(double)>& fn)
{
    Field f(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        f[i] = fn(g.center(i));
    }
    return f;
}

/// Midpoint rule: sum_i f_i dx.
inline double integrate(std::span<const double> f, const Grid& g)
{
    require_size(f, g, "integrate");
    double s = 0.0;
    for (double v : f) {
        s += v;
    }
    return s * g.dx();
}

/// Centered differences inside, one-sided at no-flux walls, wrap-around when periodic.
inline Field gradient(std::span<const double> f, const Grid& g)
{
    if (f.size() < 3) {
        throw GridTooSmallError("gradient: need at least 3 cells");
    }
    require_size(f, g, "gradient");
    const std::size_t n = f.size();
    const double inv2dx = 0.5 / g.dx();
    Field d(n);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        d[i] = (f[i + 1] - f[i - 1]) * inv2dx;
    }
    if (g.periodic()) {
        d[0] = (f[1] - f[n - 1]) * inv2dx;
        d[n - 1] = (f[0] - f[n - 2]) * inv2dx;
    } else {
        d[0] = (f[1] - f[0]) / g.dx();
        d[n - 1] = (f[n - 1] - f[n - 2]) / g.dx();
    }
    return d;
}

/// Discrete L^m norm (sum_i |f_i|^m dx)^(1/m); m = infinity gives max |f_i|.
inline double lm_norm(std::span<const double> f, const Grid& g, double m)
{
    if (!(m >= 1.0)) {
        throw InvalidExponentError("lm_norm: exponent must be >= 1");
    }
    require_size(f, g, "lm_norm");
    if (std::isinf(m)) {
        double mx = 0.0;
        for (double v : f) {
            mx = std::max(mx, std::abs(v));
        }
        return mx;
    }
    double s = 0.0;
    if (m == 1.0) {
        for (double v : f) {
            s += std::abs(v);
        }
        return s * g.dx();
    }
    if (m == 2.0) {
        for (double v : f) {
            s += v * v;
        }
        return std::sqrt(s * g.dx());
    }
    for (double v : f) {
        s += std::pow(std::abs(v), m);
    }
    return std::pow(s * g.dx(), 1.0 / m);
}

inline double l1_distance(std::span<const double> a, std::span<const double> b, const Grid& g)
{
    require_size(a, g, "l1_distance");
    require_size(b, g, "l1_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += std::abs(a[i] - b[i]);
    }
    return s * g.dx();
}

inline double l2_distance(std::span<const double> a, std::span<const double> b, const Grid& g)
{
    require_size(a, g, "l2_distance");
    require_size(b, g, "l2_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s * g.dx());
}

} // namespace mfglab
