#include <doctest.h>

#include <cmath>
#include <random>

#include "kanop/greeks.hpp"

using namespace kanop;

namespace {

MarketSpec put_market() {
    MarketSpec m;
    m.spot = 4.0;
    m.strike = 4.0;
    m.sigma_y = 0.2;
    m.n_steps = 50;
    m.periods_per_year = 252;
    return m;
}

Product vanilla(const MarketSpec& m, ProductKind kind) { return {kind, m.strike, exercise_grid(m.n_steps)}; }

}  // namespace

TEST_CASE("t1 model doubles polynomial orders only") {
    ModelSpec wl;
    wl.kind = ModelKind::weighted_laguerre;
    wl.basis_order = 6;
    const ModelSpec t1 = t1_model_spec(wl);
    CHECK(t1.basis_order == 12);
    CHECK(design_width(basis_spec(t1, 1, 4.0), 1) == 13);

    ModelSpec kan;
    kan.kind = ModelKind::kan;
    kan.basis_order = 6;
    CHECK(t1_model_spec(kan).basis_order == 6);
    CHECK(t1_model_spec(kan).kan_hidden == kan.kan_hidden);
}

TEST_CASE("perfect-fit delta reproduces the closed form") {
    const MarketSpec m = euro_delta_market();
    const DeltaResult d = perfect_fit_delta_check(m, OptionKind::call, 200000, 11);
    const double exact = bs_delta({100.0, 102.0, 0.2, 0.0, 0.0, 30.0 / 250.0, OptionKind::call});
    INFO("delta ", d.delta, " se ", d.std_error);
    CHECK(std::abs(d.delta - exact) <= 3.0 * d.std_error);
    CHECK(std::abs(d.delta - 0.4008) <= 0.003);
    CHECK(d.intrinsic_fraction == 0.0);
    CHECK(d.model_kind == "oracle");
}

TEST_CASE("pathwise estimator is unbiased across random markets") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> spot(80.0, 120.0), vol(0.1, 0.4), rate(0.0, 0.05), yield(0.0, 0.03);
    std::uniform_int_distribution<int> steps(5, 40);
    int within = 0;
    for (int trial = 0; trial < 10; ++trial) {
        MarketSpec m;
        m.spot = spot(rng);
        m.strike = 100.0;
        m.sigma_y = vol(rng);
        m.r_y = rate(rng);
        m.div_y = yield(rng);
        m.n_steps = steps(rng);
        m.periods_per_year = 252;
        const OptionKind kind = trial % 2 == 0 ? OptionKind::call : OptionKind::put;
        const DeltaResult d = perfect_fit_delta_check(m, kind, 40000, 100 + trial);
        const double exact = bs_delta({m.spot, m.strike, m.sigma_y, m.r_y, m.div_y, m.maturity_years(), kind});
        INFO("trial ", trial, " delta ", d.delta, " exact ", exact, " se ", d.std_error);
        // 3 SE per trial; allow one excursion in ten at this width.
        within += std::abs(d.delta - exact) <= 3.0 * d.std_error ? 1 : 0;
        CHECK(std::abs(d.delta - exact) <= 5.0 * d.std_error);
    }
    CHECK(within >= 9);
}

TEST_CASE("deterministic limits") {
    // Zero volatility, deep in the money call: dV/dS1 = 1 and S1/S0 = e^{r dt}.
    MarketSpec call_m = euro_delta_market();
    call_m.sigma_y = 0.0;
    call_m.spot = 150.0;
    const DeltaResult c = perfect_fit_delta_check(call_m, OptionKind::call, 1000, 1);
    CHECK(c.delta == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c.std_error == doctest::Approx(0.0).epsilon(1e-12));

    // Deep in the money put with no volatility exercises immediately at t1.
    MarketSpec put_m = put_market();
    put_m.sigma_y = 0.0;
    put_m.spot = 2.0;
    const PathSet paths = simulate_gbm(put_m, 1000, 2);
    const Product put = vanilla(put_m, ProductKind::american_put);
    ModelSpec spec;
    spec.kind = ModelKind::hermite;
    const LsmcRun run = lsmc_price(paths, put, make_model_factory(spec, put, put_m), {});
    const auto model = fit_t1_model(paths, put, spec, put_m, run.first_date_targets);
    const DeltaResult d = delta_estimate(paths, put, *model, put_m);
    CHECK(d.delta == -1.0);
    CHECK(d.intrinsic_fraction == 1.0);
}

TEST_CASE("constant continuation gives zero delta") {
    const MarketSpec m = put_market();
    const PathSet paths = simulate_gbm(m, 2000, 3);
    Product put = vanilla(m, ProductKind::american_put);
    put.strike = 1.0;  // never in the money
    ModelSpec spec;
    spec.kind = ModelKind::weighted_laguerre;
    const auto model = fit_t1_model(paths, put, spec, m, Vector::Constant(2000, 0.25));
    CHECK(model->predict(features(put, paths, 1)).isApprox(Vector::Constant(2000, 0.25), 1e-9));
    const DeltaResult d = delta_estimate(paths, put, *model, m);
    CHECK(std::abs(d.delta) < 1e-8);
}

TEST_CASE("fitted delta at the put parameters") {
    const MarketSpec m = put_market();
    const PathSet paths = simulate_gbm(m, 10000, 42);
    const Product put = vanilla(m, ProductKind::american_put);
    for (ModelKind kind : {ModelKind::weighted_laguerre, ModelKind::hermite}) {
        ModelSpec spec;
        spec.kind = kind;
        const LsmcRun run = lsmc_price(paths, put, make_model_factory(spec, put, m), {});
        const auto model = fit_t1_model(paths, put, spec, m, run.first_date_targets);
        const DeltaResult d = delta_estimate(paths, put, *model, m);
        INFO(to_string(kind), " delta ", d.delta);
        CHECK(d.delta < 0.0);
        CHECK(d.delta > -1.0);
        CHECK(std::abs(d.delta - (-0.4822)) < 0.03);
    }
}

TEST_CASE("asian delta is out of scope") {
    MarketSpec m;
    m.n_steps = 4;
    m.periods_per_year = 52;
    const PathSet paths = augment_twap(simulate_gbm(m, 10, 1), TwapConvention::include_t0);
    const Product asian{ProductKind::asian_american_call, 100.0, exercise_grid(4)};
    FunctionContinuation zero([](const Matrix& x) { return Vector(Vector::Zero(x.rows())); },
                              [](const Matrix& x) { return Matrix(Matrix::Zero(x.rows(), x.cols())); });
    CHECK_THROWS_AS(delta_estimate(paths, asian, zero, m), std::invalid_argument);
}
