#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <utility>

#include "kanop/linalg.hpp"

namespace kanop {

enum class BasisFamily { laguerre, weighted_laguerre, hermite, monomial };

struct BasisSpec {
    BasisFamily family = BasisFamily::laguerre;
    int order = 4;
    bool cross_products = false;
    bool normalize_inputs = false;
    double input_scale = 1.0;  // features are divided by this when normalize_inputs is set

    void validate(Eigen::Index n_inputs) const;
};

/// Value and derivative of a univariate basis polynomial.
template <typename Scalar>
struct BasisValue {
    Scalar value;
    Scalar derivative;
};

/// L_p(x) via (1/p)[(2p-1-x)L_{p-1} - (p-1)L_{p-2}], with L'_p = L'_{p-1} - L_{p-1}.
template <typename Scalar>
BasisValue<Scalar> laguerre_eval(int p, Scalar x) {
    Scalar prev{1}, prev_d{0};
    if (p == 0) return {prev, prev_d};
    Scalar cur = Scalar(1) - x, cur_d{-1};
    for (int q = 2; q <= p; ++q) {
        const Scalar next = ((Scalar(2 * q - 1) - x) * cur - Scalar(q - 1) * prev) / Scalar(q);
        const Scalar next_d = cur_d - cur;
        prev = cur;
        prev_d = cur_d;
        cur = next;
        cur_d = next_d;
    }
    return {cur, cur_d};
}

/// Physicists' Hermite: H_p = 2x H_{p-1} - 2(p-1) H_{p-2}, H'_p = 2p H_{p-1}.
template <typename Scalar>
BasisValue<Scalar> hermite_eval(int p, Scalar x) {
    Scalar prev{1};
    if (p == 0) return {prev, Scalar(0)};
    Scalar cur = Scalar(2) * x;
    for (int q = 2; q <= p; ++q) {
        const Scalar next = Scalar(2) * x * cur - Scalar(2 * (q - 1)) * prev;
        prev = cur;
        cur = next;
    }
    return {cur, Scalar(2 * p) * prev};
}

/// Arguments above this make e^{-x/2} leave the normal double range.
inline constexpr double kWeightedLaguerreUnderflow = 1400.0;

/// Number of weighted Laguerre evaluations that hit the underflow guard.
std::uint64_t weighted_laguerre_underflow_count();
void reset_weighted_laguerre_underflow_count();
void note_weighted_laguerre_underflow();

/// e^{-x/2} L_p(x); returns zero (and counts) past the underflow guard.
template <typename Scalar>
BasisValue<Scalar> weighted_laguerre_eval(int p, Scalar x) {
    using std::exp;
    if (x > Scalar(kWeightedLaguerreUnderflow)) {
        note_weighted_laguerre_underflow();
        return {Scalar(0), Scalar(0)};
    }
    const auto l = laguerre_eval(p, x);
    const Scalar w = exp(-x / Scalar(2));
    return {w * l.value, w * (l.derivative - l.value / Scalar(2))};
}

template <typename Scalar>
BasisValue<Scalar> monomial_eval(int p, Scalar x) {
    using std::pow;
    if (p == 0) return {Scalar(1), Scalar(0)};
    return {pow(x, p), Scalar(p) * pow(x, p - 1)};
}

template <typename Scalar>
BasisValue<Scalar> basis_eval(BasisFamily family, int p, Scalar x) {
    switch (family) {
        case BasisFamily::laguerre: return laguerre_eval(p, x);
        case BasisFamily::weighted_laguerre: return weighted_laguerre_eval(p, x);
        case BasisFamily::hermite: return hermite_eval(p, x);
        case BasisFamily::monomial: return monomial_eval(p, x);
    }
    return {Scalar(0), Scalar(0)};
}

/// Columns: constant, B_1..B_p of each input, then (cross_products, two
/// inputs) B_i(x1) B_j(x2) for i, j >= 1 and i + j <= p.
Eigen::Index design_width(const BasisSpec& spec, Eigen::Index n_inputs);

Matrix design_matrix(const BasisSpec& spec, const Matrix& features);

/// d(design row)/d(raw feature `input`) for every row.
Matrix design_matrix_derivative(const BasisSpec& spec, const Matrix& features, Eigen::Index input);

struct OlsModel {
    BasisSpec spec;
    Vector coefficients;
    double condition_diagnostic = 1.0;  // ratio of extreme |R| diagonal entries after column scaling
    bool rank_deficient = false;
    Eigen::Index n_obs = 0;
    Eigen::Index n_inputs = 0;
};

/// Least squares on a prebuilt design matrix by column-pivoted QR, falling
/// back to the minimum-norm complete orthogonal decomposition when the
/// scaled design is rank deficient.
OlsModel ols_fit(const Matrix& design, const Vector& targets);

/// Builds the design from `spec` and fits.
OlsModel ols_fit(const BasisSpec& spec, const Matrix& features, const Vector& targets);

Vector ols_predict(const OlsModel& model, const Matrix& features);

/// One column per input: d prediction / d raw feature.
Matrix ols_input_gradient(const OlsModel& model, const Matrix& features);

std::string_view to_string(BasisFamily family);
BasisFamily parse_basis_family(std::string_view text);

}  // namespace kanop
