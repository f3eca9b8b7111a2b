#include "kanop/greeks.hpp"

#include <cmath>
#include <stdexcept>

namespace kanop {

namespace {

// Neumaier-compensated mean, so the reported delta does not depend on
// summation order beyond rounding of the final division.
struct CompensatedSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double v) {
        const double t = sum + v;
        carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + carry; }
};

}  // namespace

ModelSpec t1_model_spec(const ModelSpec& pricing) {
    ModelSpec spec = pricing;
    if (is_basis_model(spec.kind)) spec.basis_order *= 2;
    return spec;
}

std::unique_ptr<ContinuationModel> fit_t1_model(const PathSet& paths, const Product& product,
                                                const ModelSpec& pricing, const MarketSpec& market,
                                                const Vector& t1_targets) {
    product.validate(&paths);
    const int t1 = product.exercise_dates.front();
    if (t1_targets.size() != paths.n_paths()) throw std::invalid_argument("t1 targets do not match the path count");
    auto model = make_model_factory(t1_model_spec(pricing), product, market)(t1);
    model->fit(features(product, paths, t1), t1_targets);
    return model;
}

DeltaResult delta_estimate(const PathSet& paths, const Product& product, const ContinuationModel& t1_model,
                           const MarketSpec& market, bool allow_exercise) {
    if (product.kind == ProductKind::asian_american_call)
        throw std::invalid_argument("delta is only estimated for vanilla products");
    product.validate(&paths);
    const int t1 = product.exercise_dates.front();
    const Matrix x = features(product, paths, t1);
    const Vector fitted = t1_model.predict(x);
    const Matrix grad = t1_model.input_gradient(x);
    const Vector iv = intrinsic_at(product, paths, t1);
    const double payoff_slope = product.kind == ProductKind::american_put ? -1.0 : 1.0;
    const double disc = std::exp(-market.r_y * t1 * paths.dt_years);
    const double s0 = paths.spot();

    const Eigen::Index n = paths.n_paths();
    Vector contrib(n);
    CompensatedSum total;
    Eigen::Index on_intrinsic = 0;
    for (Eigen::Index p = 0; p < n; ++p) {
        // Ties go to the continuation branch, matching the exercise rule.
        const bool exercise = allow_exercise && iv[p] > 0.0 && iv[p] > fitted[p];
        const double dv_ds1 = exercise ? payoff_slope : grad(p, 0);
        on_intrinsic += exercise ? 1 : 0;
        contrib[p] = disc * dv_ds1 * (x(p, 0) / s0);
        total.add(contrib[p]);
    }
    DeltaResult out;
    out.n_paths = n;
    out.delta = total.value() / double(n);
    CompensatedSum sq;
    for (Eigen::Index p = 0; p < n; ++p) sq.add((contrib[p] - out.delta) * (contrib[p] - out.delta));
    out.std_error = n > 1 ? std::sqrt(sq.value() / double(n - 1) / double(n)) : 0.0;
    out.model_kind = std::string(t1_model.kind());
    out.intrinsic_fraction = double(on_intrinsic) / double(n);
    return out;
}

MarketSpec euro_delta_market() {
    MarketSpec m;
    m.spot = 100.0;
    m.strike = 102.0;
    m.sigma_y = 0.2;
    m.r_y = 0.0;
    m.div_y = 0.0;
    m.n_steps = 30;
    m.step_unit = StepUnit::day;
    m.periods_per_year = 250;
    return m;
}

DeltaResult perfect_fit_delta_check(const MarketSpec& market, OptionKind kind, Eigen::Index n_paths,
                                    std::uint64_t seed) {
    const PathSet paths = simulate_gbm(market, n_paths, seed);
    Product product;
    product.kind = kind == OptionKind::put ? ProductKind::american_put : ProductKind::american_call;
    product.strike = market.strike;
    product.exercise_dates = exercise_grid(market.n_steps);
    const auto model = make_oracle_factory(product, market)(product.exercise_dates.front());
    return delta_estimate(paths, product, *model, market, /*allow_exercise=*/false);
}

}  // namespace kanop
