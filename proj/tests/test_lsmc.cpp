#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>

#include "kanop/lsmc.hpp"
#include "kanop/oracle.hpp"

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

MarketSpec weekly_market(double strike, int weeks, double sigma) {
    MarketSpec m;
    m.spot = 100.0;
    m.strike = strike;
    m.sigma_y = sigma;
    m.r_y = 0.05;
    m.n_steps = weeks;
    m.step_unit = StepUnit::week;
    m.periods_per_year = 52;
    return m;
}

Product product_for(const MarketSpec& m, ProductKind kind) { return {kind, m.strike, exercise_grid(m.n_steps)}; }

ModelSpec basis_model(ModelKind kind, int order = 6) {
    ModelSpec s;
    s.kind = kind;
    s.basis_order = order;
    return s;
}

// Continuation value pinned to a function of the intrinsic value.
ModelFactory intrinsic_offset_factory(const Product& product, double offset) {
    return [product, offset](int) -> std::unique_ptr<ContinuationModel> {
        auto value = [product, offset](const Matrix& x) {
            Vector out(x.rows());
            for (Eigen::Index r = 0; r < x.rows(); ++r) out[r] = intrinsic(product, x(r, 0), 0.0) + offset;
            return out;
        };
        auto gradient = [](const Matrix& x) { return Matrix(Matrix::Zero(x.rows(), x.cols())); };
        return std::make_unique<FunctionContinuation>(value, gradient);
    };
}

}  // namespace

TEST_CASE("regression targets") {
    CashflowState state;
    state.amount = Vector(3);
    state.amount << 0.5, 0.0, 1.25;
    state.date = Eigen::VectorXi(3);
    state.date << 10, 50, 12;
    CHECK(regression_targets(state, 9, 0.0, 1.0 / 252.0) == state.amount);

    CashflowState ahead;
    ahead.amount = Vector::Ones(1);
    ahead.date = Eigen::VectorXi::Constant(1, 7);
    CHECK(std::abs(regression_targets(ahead, 5, 0.05, 1.0 / 52.0)[0] - 0.998078771004590) < 1e-14);

    CashflowState worthless;
    worthless.amount = Vector::Zero(4);
    worthless.date = Eigen::VectorXi::Constant(4, 13);
    CHECK((regression_targets(worthless, 2, 0.05, 1.0 / 52.0).array() == 0.0).all());
}

TEST_CASE("flat paths price to zero and never fit") {
    MarketSpec m = put_market();
    m.sigma_y = 0.0;
    const PathSet paths = simulate_gbm(m, 500, 1);
    const Product put = product_for(m, ProductKind::american_put);
    for (ModelKind kind : {ModelKind::weighted_laguerre, ModelKind::hermite, ModelKind::kan, ModelKind::mlp}) {
        ModelSpec spec = basis_model(kind);
        const LsmcRun run = lsmc_price(paths, put, make_model_factory(spec, put, m), {});
        CHECK(run.result.price == 0.0);
        CHECK(run.result.std_error == 0.0);
        CHECK(run.model_instances.empty());
    }
}

TEST_CASE("zero-target dates skip the fit") {
    MarketSpec m = put_market();
    m.strike = 1.0;  // deep out of the money: every cashflow is zero
    const PathSet paths = simulate_gbm(m, 2000, 2);
    const Product put = product_for(m, ProductKind::american_put);
    int calls = 0;
    ModelFactory counting = [&](int date) {
        ++calls;
        return make_model_factory(basis_model(ModelKind::hermite), put, m)(date);
    };
    const LsmcRun run = lsmc_price(paths, put, counting, {});
    CHECK(calls == 0);
    CHECK(run.result.price == 0.0);
    for (int k = 1; k < 50; ++k) CHECK(run.result.fit_mse[k] == 0.0);
}

TEST_CASE("one live cashflow per path through the induction") {
    const MarketSpec m = put_market();
    const PathSet paths = simulate_gbm(m, 5000, 3);
    const Product put = product_for(m, ProductKind::american_put);
    LsmcConfig cfg;
    int last_k = m.n_steps;
    Vector previous_amount = intrinsic_at(put, paths, m.n_steps).cwiseMax(0.0);
    Eigen::VectorXi previous_date = Eigen::VectorXi::Constant(paths.n_paths(), m.n_steps);
    bool ok = true;
    cfg.on_step = [&](int k, const CashflowState& state) {
        ok = ok && k == last_k - 1;
        last_k = k;
        const Vector iv = intrinsic_at(put, paths, k);
        for (Eigen::Index p = 0; p < state.n_paths(); ++p) {
            ok = ok && state.amount[p] >= 0.0 && state.date[p] >= k && state.date[p] <= m.n_steps;
            if (state.date[p] == k) {
                // Newly exercised: the live cashflow is the intrinsic value now.
                ok = ok && state.amount[p] == iv[p] && iv[p] > 0.0;
            } else {
                ok = ok && state.amount[p] == previous_amount[p] && state.date[p] == previous_date[p];
            }
        }
        previous_amount = state.amount;
        previous_date = state.date;
    };
    const LsmcRun run = lsmc_price(paths, put, make_model_factory(basis_model(ModelKind::weighted_laguerre), put, m), cfg);
    CHECK(ok);
    CHECK(last_k == 1);
    CHECK(run.final_state.date.minCoeff() >= 1);
}

TEST_CASE("exercise rule is strict on ties") {
    const MarketSpec m = put_market();
    const PathSet paths = simulate_gbm(m, 3000, 4);
    const Product put = product_for(m, ProductKind::american_put);

    // Continuation equal to intrinsic: nobody exercises early.
    const LsmcRun tie = lsmc_price(paths, put, intrinsic_offset_factory(put, 0.0), {});
    for (int k = 1; k < m.n_steps; ++k) CHECK(tie.result.exercise_fraction[k] == 0.0);
    const PricingResult european = eurasian_price(paths, put, 0.0);
    CHECK(tie.result.price == doctest::Approx(european.price).epsilon(1e-14));

    // A hair below intrinsic: every in-the-money path exercises at its first chance.
    const LsmcRun below = lsmc_price(paths, put, intrinsic_offset_factory(put, -1e-12), {});
    Eigen::Index itm_at_1 = 0;
    const Vector iv1 = intrinsic_at(put, paths, 1);
    for (Eigen::Index p = 0; p < paths.n_paths(); ++p) itm_at_1 += iv1[p] > 0.0 ? 1 : 0;
    CHECK(below.result.exercise_fraction[1] == doctest::Approx(double(itm_at_1) / double(paths.n_paths())));

    // Zero intrinsic never exercises, even against a negative continuation.
    const LsmcRun negative = lsmc_price(paths, put, intrinsic_offset_factory(put, -10.0), {});
    for (Eigen::Index p = 0; p < paths.n_paths(); ++p)
        if (negative.final_state.date[p] < m.n_steps)
            CHECK(negative.final_state.amount[p] > 0.0);
}

TEST_CASE("prices agree with the binomial oracle") {
    const MarketSpec m = put_market();
    const PathSet paths = simulate_gbm(m, 10000, 5);
    const Product put = product_for(m, ProductKind::american_put);
    const double crr = crr_american_price({4.0, 4.0, 0.2, 0.0, 0.0, 50.0 / 252.0, OptionKind::put}, 5000);
    for (ModelKind kind : {ModelKind::weighted_laguerre, ModelKind::hermite, ModelKind::laguerre, ModelKind::oracle}) {
        const LsmcRun run = lsmc_price(paths, put, make_model_factory(basis_model(kind), put, m), {});
        INFO(to_string(kind), " price ", run.result.price, " se ", run.result.std_error);
        CHECK(std::abs(run.result.price - crr) <= 3.0 * run.result.std_error + 0.002);
        CHECK(run.result.model_kind == (kind == ModelKind::oracle ? "oracle" : "ols"));
    }

    // Positive rates make early exercise valuable; LSMC must find the premium.
    MarketSpec rated;
    rated.spot = 36.0;
    rated.strike = 40.0;
    rated.sigma_y = 0.2;
    rated.r_y = 0.06;
    rated.n_steps = 50;
    rated.periods_per_year = 50;
    const PathSet rp = simulate_gbm(rated, 20000, 6);
    const Product rput = product_for(rated, ProductKind::american_put);
    LsmcConfig cfg;
    cfg.rate = rated.r_y;
    ModelSpec spec = basis_model(ModelKind::laguerre, 3);
    spec.normalize_inputs = true;
    const LsmcRun run = lsmc_price(rp, rput, make_model_factory(spec, rput, rated), cfg);
    const double american = crr_american_price({36.0, 40.0, 0.2, 0.06, 0.0, 1.0, OptionKind::put}, 5000);
    INFO("rated price ", run.result.price, " crr ", american);
    CHECK(std::abs(run.result.price - american) <= 3.0 * run.result.std_error + 0.02);
    CHECK(run.result.price > eurasian_price(rp, rput, 0.06).price + 0.1);
}

TEST_CASE("itm-only fitting") {
    const MarketSpec m = put_market();
    const PathSet paths = simulate_gbm(m, 10000, 7);
    const Product put = product_for(m, ProductKind::american_put);
    LsmcConfig cfg;
    cfg.itm_only = true;
    const LsmcRun run = lsmc_price(paths, put, make_model_factory(basis_model(ModelKind::laguerre, 3), put, m), cfg);
    const double crr = crr_american_price({4.0, 4.0, 0.2, 0.0, 0.0, 50.0 / 252.0, OptionKind::put}, 5000);
    CHECK(std::abs(run.result.price - crr) <= 3.0 * run.result.std_error + 0.002);
}

TEST_CASE("fresh model per date and determinism") {
    const MarketSpec m = put_market();
    const PathSet paths = simulate_gbm(m, 400, 8);
    const Product put = product_for(m, ProductKind::american_put);
    ModelSpec spec;
    spec.kind = ModelKind::kan;
    spec.train.epochs = 5;
    const auto factory = make_model_factory(spec, put, m);
    const LsmcRun a = lsmc_price(paths, put, factory, {});
    const LsmcRun b = lsmc_price(paths, put, factory, {});
    CHECK(a.result.price == b.result.price);
    CHECK(a.result.exercise_fraction == b.result.exercise_fraction);
    const std::set<std::uint64_t> ids(a.model_instances.begin(), a.model_instances.end());
    CHECK(ids.size() == a.model_instances.size());
    CHECK(a.model_instances.size() == 49);
    CHECK(a.result.model_kind == "kan");
}

TEST_CASE("fit failures name the step") {
    const MarketSpec m = put_market();
    const PathSet paths = simulate_gbm(m, 300, 9);
    const Product put = product_for(m, ProductKind::american_put);
    ModelSpec spec;
    spec.kind = ModelKind::mlp;
    spec.mlp_hidden = {4};
    spec.train.learning_rate = 1e300;
    spec.train.epochs = 3;
    try {
        lsmc_price(paths, put, make_model_factory(spec, put, m), {});
        FAIL("expected a numeric failure");
    } catch (const NumericFailure& e) {
        CHECK(std::string(e.what()).find("step 49") != std::string::npos);
    }

    ModelFactory throwing = [](int) -> std::unique_ptr<ContinuationModel> {
        return std::make_unique<FunctionContinuation>([](const Matrix&) -> Vector { throw std::runtime_error("boom"); },
                                                      [](const Matrix& x) { return Matrix(x); });
    };
    CHECK_THROWS_WITH_AS(lsmc_price(paths, put, throwing, {}), doctest::Contains("step 49"), std::runtime_error);
}

TEST_CASE("fit curve dumps") {
    const MarketSpec m = put_market();
    const PathSet paths = simulate_gbm(m, 1000, 10);
    const Product put = product_for(m, ProductKind::american_put);
    LsmcConfig cfg;
    cfg.dump_dates = {49, 25, 1};
    const auto oracle = make_oracle_factory(put, m);
    cfg.true_continuation = [&](const Matrix& x, int k) { return oracle(k)->predict(x); };
    const LsmcRun run = lsmc_price(paths, put, make_model_factory(basis_model(ModelKind::hermite), put, m), cfg);
    REQUIRE(run.dump.size() == 3);
    CHECK(run.dump[0].date == 1);
    CHECK(run.dump[1].date == 25);
    CHECK(run.dump[2].date == 49);
    for (const FitCurve& c : run.dump) {
        CHECK(c.features.rows() == 1000);
        CHECK(c.fitted.size() == 1000);
        REQUIRE(c.truth);
        CHECK(c.truth->size() == 1000);
    }

    const std::string file = "test_lsmc_fit_curve.csv";
    write_fit_curve_csv(run.dump[0], file);
    std::ifstream in(file);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "path_id,date_index,feature_1,f_hat,f_true");
    CHECK(row.rfind("0,1,", 0) == 0);
    in.close();
    std::remove(file.c_str());

    FitCurve blank{3, Matrix::Ones(2, 2), Vector::Zero(2), std::nullopt};
    write_fit_curve_csv(blank, file);
    std::ifstream in2(file);
    std::getline(in2, header);
    std::getline(in2, row);
    CHECK(header == "path_id,date_index,feature_1,feature_2,f_hat,f_true");
    CHECK(row == "0,3,1,1,0,");
    in2.close();
    std::remove(file.c_str());
}

TEST_CASE("eurasian price") {
    MarketSpec flat = weekly_market(100.0, 13, 0.0);
    flat.r_y = 0.0;
    const Product atm = product_for(flat, ProductKind::asian_american_call);
    const PathSet fp = augment_twap(simulate_gbm(flat, 100, 1), TwapConvention::include_t0);
    CHECK(eurasian_price(fp, atm, 0.0).price == 0.0);

    // Deterministic in-the-money average: payoff is TWAP - K exactly.
    const Product deep{ProductKind::asian_american_call, 60.0, exercise_grid(13)};
    const PricingResult itm = eurasian_price(fp, deep, 0.0);
    CHECK(itm.price == 40.0);
    CHECK(itm.std_error == 0.0);

    // With drift the deterministic TWAP is a plain average of the grid prices.
    MarketSpec drift = weekly_market(60.0, 13, 0.0);
    const PathSet dp = augment_twap(simulate_gbm(drift, 10, 2), TwapConvention::exclude_t0);
    double twap = 0.0;
    for (int k = 1; k <= 13; ++k) twap += 100.0 * std::exp(0.05 * k / 52.0);
    twap /= 13.0;
    const double expected = (twap - 60.0) * std::exp(-0.05 * 13.0 / 52.0);
    CHECK(eurasian_price(dp, deep, 0.05).price == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("early exercise premium over the european average option") {
    const MarketSpec m = weekly_market(100.0, 13, 0.15);
    const PathSet paths = augment_twap(simulate_gbm(m, 10000, 42), TwapConvention::exclude_t0);
    const Product asian = product_for(m, ProductKind::asian_american_call);
    ModelSpec spec = basis_model(ModelKind::laguerre_cross, 4);
    spec.normalize_inputs = true;
    LsmcConfig cfg;
    cfg.rate = m.r_y;
    const LsmcRun run = lsmc_price(paths, asian, make_model_factory(spec, asian, m), cfg);
    const PricingResult euro = eurasian_price(paths, asian, m.r_y);
    CHECK(run.result.price >= euro.price - 2.0 * run.result.std_error);
    CHECK(euro.price == doctest::Approx(2.1638).epsilon(0.05));
    CHECK_THROWS_AS(make_oracle_factory(asian, m), std::invalid_argument);
}
