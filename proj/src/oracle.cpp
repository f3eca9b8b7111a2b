#include "kanop/oracle.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace kanop {

namespace {

double intrinsic(OptionKind kind, double s, double k) {
    return kind == OptionKind::call ? std::max(s - k, 0.0) : std::max(k - s, 0.0);
}

void check(const BsInputs& in) {
    if (!(in.s > 0.0) || !(in.k > 0.0)) throw std::invalid_argument("s and k must be positive");
    if (in.ttm_years < 0.0 || in.sigma < 0.0)
        throw std::invalid_argument("ttm_years and sigma must be non-negative");
}

}  // namespace

double bs_price(const BsInputs& in) {
    check(in);
    if (in.ttm_years == 0.0) return intrinsic(in.kind, in.s, in.k);
    const double t = in.ttm_years;
    const double disc_k = in.k * std::exp(-in.r * t);
    const double fwd_s = in.s * std::exp(-in.q * t);
    const double vol = in.sigma * std::sqrt(t);
    if (vol == 0.0) return intrinsic(in.kind, fwd_s, disc_k);

    const double d1 = (std::log(in.s / in.k) + (in.r - in.q + 0.5 * in.sigma * in.sigma) * t) / vol;
    const double d2 = d1 - vol;
    const double put = disc_k * std_normal_cdf(-d2) - fwd_s * std_normal_cdf(-d1);
    if (in.kind == OptionKind::put) return put;
    return put + fwd_s - disc_k;
}

double bs_delta(const BsInputs& in) {
    check(in);
    if (in.ttm_years == 0.0) throw std::domain_error("delta undefined at expiry");
    const double t = in.ttm_years;
    const double carry = std::exp(-in.q * t);
    const double vol = in.sigma * std::sqrt(t);
    double n_d1;
    if (vol == 0.0) {
        const double fwd = std::log(in.s / in.k) + (in.r - in.q) * t;
        n_d1 = fwd > 0.0 ? 1.0 : (fwd < 0.0 ? 0.0 : 0.5);
    } else {
        const double d1 = (std::log(in.s / in.k) + (in.r - in.q + 0.5 * in.sigma * in.sigma) * t) / vol;
        n_d1 = std_normal_cdf(d1);
    }
    return in.kind == OptionKind::call ? carry * n_d1 : carry * (n_d1 - 1.0);
}

double crr_american_price(const BsInputs& in, int n_tree_steps) {
    check(in);
    if (n_tree_steps < 1) throw std::invalid_argument("n_tree_steps must be at least 1");
    if (in.ttm_years == 0.0) return intrinsic(in.kind, in.s, in.k);

    const double dt = in.ttm_years / n_tree_steps;
    const double up = std::exp(in.sigma * std::sqrt(dt));
    const double down = 1.0 / up;
    const double growth = std::exp((in.r - in.q) * dt);
    const double disc = std::exp(-in.r * dt);
    // Zero volatility degenerates to a single deterministic branch.
    const double p_up = up == down ? 1.0 : std::clamp((growth - down) / (up - down), 0.0, 1.0);

    std::vector<double> values(n_tree_steps + 1);
    auto node_spot = [&](int step, int ups) {
        if (up == down) return in.s * std::pow(growth, step);
        return in.s * std::pow(up, 2 * ups - step);
    };
    for (int j = 0; j <= n_tree_steps; ++j) values[j] = intrinsic(in.kind, node_spot(n_tree_steps, j), in.k);
    for (int step = n_tree_steps - 1; step >= 0; --step) {
        for (int j = 0; j <= step; ++j) {
            const double cont = disc * (p_up * values[j + 1] + (1.0 - p_up) * values[j]);
            values[j] = std::max(cont, intrinsic(in.kind, node_spot(step, j), in.k));
        }
    }
    return values[0];
}

}  // namespace kanop
