#include "sfr/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sfr/fd.hpp"

namespace sfr {

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

ChartGrid::ChartGrid(std::array<Axis, 3> axes) : ax_(std::move(axes)) {
    stride_[2] = 1;
    stride_[1] = static_cast<std::size_t>(ax_[2].n);
    stride_[0] = stride_[1] * ax_[1].n;
}

std::optional<Vec3> ChartGrid::canonical(const Vec3& x) const {
    Vec3 y = x;
    for (int a = 0; a < 3; ++a) {
        const Axis& ax = ax_[a];
        const double span = ax.max - ax.min;
        if (ax.periodic) {
            y[a] = ax.min + std::fmod(std::fmod(x[a] - ax.min, span) + span, span);
        } else {
            const double tol = 1e-12 * span;
            if (x[a] < ax.min - tol || x[a] > ax.max + tol || !std::isfinite(x[a])) return std::nullopt;
            y[a] = std::clamp(x[a], ax.min, ax.max);
        }
    }
    return y;
}

int ChartGrid::boundary_distance(std::size_t idx) const {
    const auto c = ijk(idx);
    int d = 1 << 20;
    for (int a = 0; a < 3; ++a) {
        if (ax_[a].periodic) continue;
        d = std::min({d, c[a], ax_[a].n - 1 - c[a]});
    }
    return d;
}

ChartGrid ChartGrid::refined() const {
    auto axes = ax_;
    for (auto& a : axes) a.n = a.periodic ? 2 * a.n : 2 * a.n - 1;
    return ChartGrid(axes);
}

ChartGrid make_grid(const std::array<Axis, 3>& axes) {
    for (int a = 0; a < 3; ++a) {
        std::ostringstream os;
        if (axes[a].n < 5) {
            os << "axis " << a << ": need at least 5 points for the 4th-order stencil, got " << axes[a].n;
            throw DomainError(os.str());
        }
        if (!(axes[a].min < axes[a].max)) {
            os << "axis " << a << ": inverted or empty range [" << axes[a].min << ", " << axes[a].max << "]";
            throw DomainError(os.str());
        }
    }
    return ChartGrid(axes);
}

ChartGrid make_box(double lo, double hi, int n) {
    return make_grid({Axis{lo, hi, n, false, "x1"}, Axis{lo, hi, n, false, "x2"}, Axis{lo, hi, n, false, "x3"}});
}

Curve trace_curve(const VectorField& v, const Vec3& x0, double ds, double smax) {
    return trace(
        [&](const Vec3& x) -> std::optional<Vec3> {
            if (!v.grid.contains(x)) return std::nullopt;
            return interpolate(v, x);
        },
        x0, ds, smax);
}

}  // namespace sfr
