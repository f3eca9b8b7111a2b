#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "kanop/linalg.hpp"

namespace kanop {

/// Uniform knot vector on [lo, hi] with G intervals, extended by `order`
/// knots on each side so that G + order basis functions form a partition
/// of unity on the whole closed interval.
struct SplineGrid {
    double lo = -1.0;
    double hi = 1.0;
    int n_intervals = 5;
    int order = 3;
    std::vector<double> knots;
    bool uniform = false;  // knots equally spaced; enables the division-free path

    int n_basis() const { return n_intervals + order; }
};

inline SplineGrid make_uniform_grid(double lo, double hi, int n_intervals, int order) {
    if (!(lo < hi)) throw std::invalid_argument("spline grid needs lo < hi");
    if (n_intervals < 1) throw std::invalid_argument("spline grid needs at least one interval");
    if (order < 1) throw std::invalid_argument("spline order must be at least 1");
    SplineGrid grid{lo, hi, n_intervals, order, {}, true};
    const double h = (hi - lo) / n_intervals;
    grid.knots.resize(n_intervals + 2 * order + 1);
    for (std::size_t j = 0; j < grid.knots.size(); ++j)
        grid.knots[j] = lo + (static_cast<double>(j) - order) * h;
    return grid;
}

namespace detail {

// Full triangular Cox-de Boor table; handles spans near the ends of the
// extended knot vector where fewer than order + 1 functions are alive.
template <typename Scalar>
void bspline_basis_full(const SplineGrid& grid, Scalar x, Scalar* values, Scalar* derivatives) {
    const auto& t = grid.knots;
    const int k = grid.order;
    const int n0 = static_cast<int>(t.size()) - 1;  // degree-0 functions

    // Work buffer holds degree-d values for indices [0, n0 - d).
    Scalar work[64];
    Scalar prev[64];
    if (n0 > 64) throw std::length_error("spline grid too large for bspline_basis");
    for (int j = 0; j < n0; ++j) work[j] = (t[j] <= x && x < t[j + 1]) ? Scalar(1) : Scalar(0);

    for (int d = 1; d <= k; ++d) {
        if (d == k)
            for (int j = 0; j < n0 - d + 1; ++j) prev[j] = work[j];
        for (int j = 0; j < n0 - d; ++j) {
            const Scalar left = (x - t[j]) / (t[j + d] - t[j]) * work[j];
            const Scalar right = (t[j + d + 1] - x) / (t[j + d + 1] - t[j + 1]) * work[j + 1];
            work[j] = left + right;
        }
    }
    const int nb = grid.n_basis();
    for (int j = 0; j < nb; ++j) values[j] = work[j];
    if (derivatives != nullptr) {
        for (int j = 0; j < nb; ++j) {
            derivatives[j] = Scalar(k) / (t[j + k] - t[j]) * prev[j] -
                             Scalar(k) / (t[j + k + 1] - t[j + 1]) * prev[j + 1];
        }
    }
}

}  // namespace detail

/// The at most order + 1 nonzero basis functions at x are consecutive.
/// Writes the values (and derivatives) of functions first .. first + order
/// and returns first; slots outside [0, n_basis) hold zero, as does
/// everything outside the extended knot span.
template <typename Scalar>
int bspline_window(const SplineGrid& grid, Scalar x, Scalar* values, Scalar* derivatives = nullptr) {
    const auto& t = grid.knots;
    const int k = grid.order;
    const int n0 = static_cast<int>(t.size()) - 1;
    const int nb = grid.n_basis();
    if (k > 31) throw std::length_error("spline order too large for bspline_window");

    // A uniform grid behaves like an infinite equally spaced knot
    // sequence, so the local triangle is exact on every span of the
    // extended knot vector; functions outside [0, nb) are then dropped.
    if (grid.uniform) {
        const int w = k + 1;
        if (!(x >= t[0] && x < t[n0])) {
            for (int r = 0; r < w; ++r) {
                values[r] = Scalar(0);
                if (derivatives) derivatives[r] = Scalar(0);
            }
            return 0;
        }
        const double h = (grid.hi - grid.lo) / grid.n_intervals;
        int s = static_cast<int>((x - t[0]) / h);
        if (s > n0 - 1) s = n0 - 1;
        while (s > 0 && x < t[s]) --s;
        while (s < n0 - 1 && x >= t[s + 1]) ++s;

        // Equal spacing h: every denominator is d * h, so work in u = (x - t_s) / h.
        Scalar n[32], lower[32], dn[32];
        const Scalar u = (x - t[s]) / h;
        if (k == 3) {
            // Closed-form uniform cubic pieces.
            const Scalar v = Scalar(1) - u, u2 = u * u, u3 = u2 * u;
            n[0] = v * v * v / Scalar(6);
            n[1] = (Scalar(3) * u3 - Scalar(6) * u2 + Scalar(4)) / Scalar(6);
            n[2] = (Scalar(-3) * u3 + Scalar(3) * u2 + Scalar(3) * u + Scalar(1)) / Scalar(6);
            n[3] = u3 / Scalar(6);
            if (derivatives != nullptr) {
                const Scalar inv_h = Scalar(1) / h;
                dn[0] = Scalar(-0.5) * v * v * inv_h;
                dn[1] = (Scalar(1.5) * u2 - Scalar(2) * u) * inv_h;
                dn[2] = (Scalar(-1.5) * u2 + u + Scalar(0.5)) * inv_h;
                dn[3] = Scalar(0.5) * u2 * inv_h;
            }
        } else {
            n[0] = Scalar(1);
            for (int d = 1; d <= k; ++d) {
                if (d == k)
                    for (int r = 0; r < k; ++r) lower[r] = n[r];
                const Scalar inv_d = Scalar(1) / Scalar(d);
                Scalar saved = Scalar(0);
                for (int r = 0; r < d; ++r) {
                    const Scalar tmp = n[r] * inv_d;
                    n[r] = saved + (Scalar(r + 1) - u) * tmp;
                    saved = (u + Scalar(d - r - 1)) * tmp;
                }
                n[d] = saved;
            }
            if (derivatives != nullptr) {
                const Scalar inv_h = Scalar(1) / h;
                for (int r = 0; r <= k; ++r) {
                    const Scalar a = r >= 1 ? lower[r - 1] : Scalar(0);
                    const Scalar b = r < k ? lower[r] : Scalar(0);
                    dn[r] = (a - b) * inv_h;
                }
            }
        }
        // Local functions are s - k .. s; shift the window into [0, nb).
        const int local = s - k;
        if (local >= 0 && local <= nb - w) {
            for (int r = 0; r < w; ++r) values[r] = n[r];
            if (derivatives)
                for (int r = 0; r < w; ++r) derivatives[r] = dn[r];
            return local;
        }
        const int first = std::max(0, std::min(local, nb - w));
        for (int r = 0; r < w; ++r) {
            const int q = first + r - local;
            const bool in = q >= 0 && q < w;
            values[r] = in ? n[q] : Scalar(0);
            if (derivatives) derivatives[r] = in ? dn[q] : Scalar(0);
        }
        return first;
    }

    // Span s with t[s] <= x < t[s + 1]. The local triangle covers functions
    // s - k .. s, so it needs k <= s < n0 - k (x == hi takes the full path).
    int s = -1;
    if (x >= t[k] && x < t[n0 - k])
        s = static_cast<int>(std::upper_bound(t.begin() + k, t.begin() + (n0 - k), x) - t.begin()) - 1;

    if (s < k || s >= n0 - k) {
        Scalar full_v[64], full_d[64];
        if (n0 > 64) throw std::length_error("spline grid too large for bspline_window");
        detail::bspline_basis_full(grid, x, full_v, derivatives ? full_d : nullptr);
        int first = 0;
        while (first < nb && full_v[first] == Scalar(0) && (!derivatives || full_d[first] == Scalar(0))) ++first;
        first = std::max(0, std::min(first, nb - (k + 1)));
        for (int r = 0; r <= k; ++r) {
            const int j = first + r;
            const bool in = j >= 0 && j < nb;
            values[r] = in ? full_v[j] : Scalar(0);
            if (derivatives) derivatives[r] = in ? full_d[j] : Scalar(0);
        }
        return first;
    }

    // Local triangle: n[0..d] are the degree-d functions s-d .. s.
    Scalar n[32], lower[32];
    n[0] = Scalar(1);
    Scalar left[32], right[32];
    for (int d = 1; d <= k; ++d) {
        if (d == k)
            for (int r = 0; r < k; ++r) lower[r] = n[r];
        left[d] = x - t[s + 1 - d];
        right[d] = t[s + d] - x;
        Scalar saved = Scalar(0);
        for (int r = 0; r < d; ++r) {
            const Scalar tmp = n[r] / (right[r + 1] + left[d - r]);
            n[r] = saved + right[r + 1] * tmp;
            saved = left[d - r] * tmp;
        }
        n[d] = saved;
    }
    for (int r = 0; r <= k; ++r) values[r] = n[r];
    if (derivatives != nullptr) {
        // lower[r] is the degree k-1 function s-k+1+r.
        for (int r = 0; r <= k; ++r) {
            const int j = s - k + r;
            const Scalar a = r >= 1 ? lower[r - 1] : Scalar(0);  // N_{j, k-1}
            const Scalar b = r < k ? lower[r] : Scalar(0);        // N_{j+1, k-1}
            derivatives[r] = Scalar(k) / (t[j + k] - t[j]) * a - Scalar(k) / (t[j + k + 1] - t[j + 1]) * b;
        }
    }
    return s - k;
}

/// Cox-de Boor recursion. Writes grid.n_basis() values and, when
/// `derivatives` is non-null, their first derivatives. Outside the
/// extended knot span every basis function is zero.
template <typename Scalar>
void bspline_basis(const SplineGrid& grid, Scalar x, Scalar* values, Scalar* derivatives = nullptr) {
    const int k = grid.order;
    const int nb = grid.n_basis();
    Scalar v[32], d[32];
    const int first = bspline_window(grid, x, v, derivatives ? d : nullptr);
    for (int j = 0; j < nb; ++j) values[j] = Scalar(0);
    if (derivatives)
        for (int j = 0; j < nb; ++j) derivatives[j] = Scalar(0);
    for (int r = 0; r <= k; ++r) {
        const int j = first + r;
        if (j < 0 || j >= nb) continue;
        values[j] = v[r];
        if (derivatives) derivatives[j] = d[r];
    }
}

template <typename Scalar>
struct BsplineEval {
    VectorX<Scalar> values;
    VectorX<Scalar> derivatives;
};

template <typename Scalar>
BsplineEval<Scalar> bspline_basis(const SplineGrid& grid, Scalar x) {
    BsplineEval<Scalar> out{VectorX<Scalar>(grid.n_basis()), VectorX<Scalar>(grid.n_basis())};
    bspline_basis(grid, x, out.values.data(), out.derivatives.data());
    return out;
}

}  // namespace kanop
