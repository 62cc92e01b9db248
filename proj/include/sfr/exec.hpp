#pragma once

#include <cstddef>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sfr {

enum class Exec { Serial, Parallel };

template <class F>
inline void for_each_index(std::size_t n, Exec ex, F&& f) {
#ifdef _OPENMP
    if (ex == Exec::Parallel) {
        const auto m = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < m; ++i) f(static_cast<std::size_t>(i));
        return;
    }
#endif
    (void)ex;
    for (std::size_t i = 0; i < n; ++i) f(i);
}

// Max-reduction of a per-index non-negative quantity.
template <class F>
inline double max_over(std::size_t n, Exec ex, F&& f) {
    double m = 0.0;
#ifdef _OPENMP
    if (ex == Exec::Parallel) {
        const auto k = static_cast<std::int64_t>(n);
#pragma omp parallel for reduction(max : m) schedule(static)
        for (std::int64_t i = 0; i < k; ++i) {
            const double v = f(static_cast<std::size_t>(i));
            if (v > m) m = v;
        }
        return m;
    }
#endif
    (void)ex;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = f(i);
        if (v > m) m = v;
    }
    return m;
}

int thread_count();

}  // namespace sfr
