#pragma once

#include <cmath>
#include <stdexcept>

namespace kanop {

enum class OptionKind { call, put };

/// Black-Scholes inputs; sigma, r and q are annualized, ttm in years.
struct BsInputs {
    double s = 100.0;
    double k = 100.0;
    double sigma = 0.2;
    double r = 0.0;
    double q = 0.0;
    double ttm_years = 1.0;
    OptionKind kind = OptionKind::put;
};

/// Standard normal CDF through erfc, accurate to ~1e-16 absolute.
template <typename Scalar>
Scalar std_normal_cdf(Scalar x) {
    using std::erfc;
    using std::sqrt;
    return Scalar(0.5) * erfc(-x / sqrt(Scalar(2)));
}

/// European price. ttm == 0 or sigma == 0 collapse to the discounted
/// forward intrinsic value.
double bs_price(const BsInputs& in);

/// European delta. Throws std::domain_error at expiry.
double bs_delta(const BsInputs& in);

/// Cox-Ross-Rubinstein lattice with early exercise at every node.
double crr_american_price(const BsInputs& in, int n_tree_steps = 5000);

}  // namespace kanop
