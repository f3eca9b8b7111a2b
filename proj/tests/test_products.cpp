#include <doctest.h>

#include <random>

#include "kanop/products.hpp"

using namespace kanop;

namespace {

PathSet constant_paths(Eigen::Index n, int steps, double level) {
    PathSet p;
    p.prices = Matrix::Constant(n, steps + 1, level);
    p.dt_years = 1.0 / 52.0;
    return p;
}

Product put_product(int steps) { return {ProductKind::american_put, 4.0, exercise_grid(steps)}; }

Product asian_product(double strike, int steps) { return {ProductKind::asian_american_call, strike, exercise_grid(steps)}; }

}  // namespace

TEST_CASE("intrinsic values") {
    CHECK(intrinsic(put_product(5), 3.5, 0.0) == 0.5);
    CHECK(intrinsic_positive(put_product(5), 3.5, 0.0) == 0.5);
    CHECK(intrinsic(put_product(5), 4.5, 0.0) == -0.5);
    CHECK(intrinsic_positive(put_product(5), 4.5, 0.0) == 0.0);

    Product call{ProductKind::american_call, 100.0, exercise_grid(5)};
    CHECK(intrinsic(call, 103.0, 0.0) == 3.0);

    CHECK(intrinsic(asian_product(100.0, 13), 120.0, 105.0) == 5.0);
    CHECK(intrinsic(asian_product(105.0, 13), 120.0, 100.0) == -5.0);
    CHECK(intrinsic_positive(asian_product(105.0, 13), 120.0, 100.0) == 0.0);
}

TEST_CASE("positive part matches max of the signed payoff") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(50.0, 150.0);
    for (ProductKind kind : {ProductKind::american_put, ProductKind::american_call, ProductKind::asian_american_call}) {
        const Product product{kind, 100.0, exercise_grid(4)};
        for (int i = 0; i < 1000; ++i) {
            const double s = u(rng), a = u(rng);
            CHECK(intrinsic_positive(product, s, a) == std::max(intrinsic(product, s, a), 0.0));
        }
    }
}

TEST_CASE("feature matrices") {
    MarketSpec m;
    m.spot = 4.0;
    m.n_steps = 50;
    const PathSet paths = simulate_gbm(m, 10000, 3);
    const Matrix f = features(put_product(50), paths, 25);
    CHECK(f.rows() == 10000);
    CHECK(f.cols() == 1);
    CHECK(f.col(0) == paths.prices.col(25));

    MarketSpec weekly;
    weekly.n_steps = 13;
    weekly.step_unit = StepUnit::week;
    weekly.periods_per_year = 52;
    const PathSet asian = augment_twap(simulate_gbm(weekly, 10000, 4), TwapConvention::include_t0);
    const Matrix g = features(asian_product(100.0, 13), asian, 4);
    CHECK(g.rows() == 10000);
    CHECK(g.cols() == 2);
    CHECK(g.col(1) == asian.twap->col(4));

    const PathSet flat = augment_twap(constant_paths(20, 13, 100.0), TwapConvention::exclude_t0);
    const Matrix h = features(asian_product(100.0, 13), flat, 7);
    CHECK((h.array() == 100.0).all());

    CHECK_THROWS_AS(features(asian_product(100.0, 13), constant_paths(5, 13, 100.0), 3), std::invalid_argument);
    CHECK_THROWS_AS(features(put_product(50), paths, 51), std::out_of_range);
}

TEST_CASE("features leave the path set untouched") {
    MarketSpec m;
    m.n_steps = 10;
    const PathSet paths = simulate_gbm(m, 100, 5);
    const Matrix before = paths.prices;
    Matrix f = features(put_product(10), paths, 3);
    f.setZero();
    CHECK(paths.prices == before);
}

TEST_CASE("exercise grids and validation") {
    CHECK(exercise_grid(4) == std::vector<int>{1, 2, 3, 4});
    CHECK(exercise_grid(10, 5) == std::vector<int>{5, 10});
    CHECK_THROWS_AS(exercise_grid(10, 3), std::invalid_argument);

    const PathSet paths = constant_paths(3, 4, 4.0);
    CHECK_NOTHROW(put_product(4).validate(&paths));
    CHECK_THROWS_AS(put_product(5).validate(&paths), std::invalid_argument);
    CHECK_THROWS_AS(Product({ProductKind::american_put, 4.0, {}}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(Product({ProductKind::american_put, 4.0, {2, 1}}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(Product({ProductKind::american_put, 4.0, {0, 1}}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(Product({ProductKind::american_put, -1.0, {1}}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(asian_product(100.0, 4).validate(&paths), std::invalid_argument);

    CHECK(parse_product_kind(to_string(ProductKind::asian_american_call)) == ProductKind::asian_american_call);
    CHECK_THROWS_AS(parse_product_kind("bermudan_swaption"), std::invalid_argument);
}
