#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sfr/exec.hpp"
#include "sfr/types.hpp"

namespace sfr {

struct Axis {
    double min = 0.0;
    double max = 1.0;
    int n = 5;
    bool periodic = false;
    std::string name;

    double h() const { return periodic ? (max - min) / n : (max - min) / (n - 1); }
    double coord(int i) const { return min + i * h(); }
    bool operator==(const Axis&) const = default;
};

class ChartGrid {
public:
    ChartGrid() = default;
    explicit ChartGrid(std::array<Axis, 3> axes);

    const Axis& axis(int a) const { return ax_[a]; }
    const std::array<Axis, 3>& axes() const { return ax_; }
    int n(int a) const { return ax_[a].n; }
    double h(int a) const { return ax_[a].h(); }
    std::size_t size() const { return static_cast<std::size_t>(ax_[0].n) * ax_[1].n * ax_[2].n; }
    std::size_t stride(int a) const { return stride_[a]; }

    std::size_t index(int i, int j, int k) const { return i * stride_[0] + j * stride_[1] + k; }
    std::array<int, 3> ijk(std::size_t idx) const {
        const int i = static_cast<int>(idx / stride_[0]);
        const std::size_t r = idx % stride_[0];
        return {i, static_cast<int>(r / stride_[1]), static_cast<int>(r % stride_[1])};
    }
    Vec3 point(std::size_t idx) const {
        const auto c = ijk(idx);
        return {ax_[0].coord(c[0]), ax_[1].coord(c[1]), ax_[2].coord(c[2])};
    }

    // Wraps periodic coordinates; nullopt when a non-periodic coordinate is outside the chart.
    std::optional<Vec3> canonical(const Vec3& x) const;
    bool contains(const Vec3& x) const { return canonical(x).has_value(); }
    // Number of index steps from the nearest non-periodic face (large for periodic axes).
    int boundary_distance(std::size_t idx) const;

    ChartGrid refined() const;  // halves h on every axis
    bool operator==(const ChartGrid& o) const { return ax_ == o.ax_; }

private:
    std::array<Axis, 3> ax_{};
    std::array<std::size_t, 3> stride_{};
};

// Validating constructor: n >= 5 per axis and min < max.
ChartGrid make_grid(const std::array<Axis, 3>& axes);
ChartGrid make_box(double lo, double hi, int n);

template <class T>
struct Field {
    ChartGrid grid;
    std::vector<T> data;

    Field() = default;
    explicit Field(const ChartGrid& g) : grid(g), data(g.size()) {}
    Field(const ChartGrid& g, const T& fill) : grid(g), data(g.size(), fill) {}

    std::size_t size() const { return data.size(); }
    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }
};

using ScalarField = Field<double>;
using ComplexField = Field<cplx>;
using VectorField = Field<Vec3>;
using TensorField = Field<Mat3>;

template <class T, class Fn>
Field<T> sample(const ChartGrid& g, Fn&& fn, Exec ex = Exec::Parallel) {
    Field<T> out(g);
    for_each_index(g.size(), ex, [&](std::size_t i) { out[i] = fn(g.point(i)); });
    return out;
}

template <class R, class T, class Fn>
Field<R> map_field(const Field<T>& in, Fn&& fn, Exec ex = Exec::Parallel) {
    Field<R> out(in.grid);
    for_each_index(in.size(), ex, [&](std::size_t i) { out[i] = fn(in[i], i); });
    return out;
}

}  // namespace sfr
