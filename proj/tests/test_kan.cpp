#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "kanop/kan.hpp"
#include "kanop/poly_basis.hpp"

using namespace kanop;

namespace {

Matrix uniform_column(Eigen::Index n, double lo, double hi, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix x(n, 1);
    for (Eigen::Index r = 0; r < n; ++r) x(r, 0) = u(rng);
    return x;
}

// Single 1 -> 1 layer whose spline reproduces the identity on [-1, 1],
// coefficients from an ordinary least-squares fit of x on the basis.
KanNetwork identity_layer() {
    KanNetwork net = kan_init({{1, 1}, 5, 3}, 1);
    const SplineGrid& grid = net.layers()[0].grid;
    const int nb = grid.n_basis();
    Matrix design(401, nb);
    Vector target(401);
    for (int r = 0; r <= 400; ++r) {
        const double x = -1.0 + 2.0 * r / 400.0;
        const auto eval = bspline_basis(grid, x);
        design.row(r) = eval.values.transpose();
        target[r] = x;
    }
    net.spline_coef(0, 0, 0) = ols_fit(design, target).coefficients;
    net.base_weight(0, 0, 0) = 0.0;
    return net;
}

}  // namespace

TEST_CASE("bspline partition of unity") {
    for (int order : {1, 2, 3, 4}) {
        const SplineGrid grid = make_uniform_grid(-1.0, 1.0, 5, order);
        CHECK(grid.knots.size() == std::size_t(5 + 2 * order + 1));
        std::mt19937_64 rng(order);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int i = 0; i < 500; ++i) {
            const auto eval = bspline_basis(grid, u(rng));
            CHECK(std::abs(eval.values.sum() - 1.0) <= 1e-12);
            CHECK((eval.values.array() >= 0.0).all());
        }
        CHECK(std::abs(bspline_basis(grid, 1.0).values.sum() - 1.0) <= 1e-12);
        CHECK(std::abs(bspline_basis(grid, -1.0).values.sum() - 1.0) <= 1e-12);
    }
}

TEST_CASE("linear bspline at a knot is a unit vector") {
    const SplineGrid grid = make_uniform_grid(-1.0, 1.0, 5, 1);
    const auto eval = bspline_basis(grid, grid.knots[3]);
    CHECK(eval.values.maxCoeff() == doctest::Approx(1.0));
    CHECK((eval.values.array() != 0.0).count() == 1);
}

TEST_CASE("bspline derivatives match finite differences") {
    const SplineGrid grid = make_uniform_grid(-1.0, 1.0, 5, 3);
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-0.99, 0.99);
    for (int i = 0; i < 100; ++i) {
        const double x = u(rng);
        const auto eval = bspline_basis(grid, x);
        const auto up = bspline_basis(grid, x + 1e-6);
        const auto down = bspline_basis(grid, x - 1e-6);
        const Vector fd = (up.values - down.values) / 2e-6;
        for (int b = 0; b < grid.n_basis(); ++b)
            CHECK(std::abs(fd[b] - eval.derivatives[b]) <= 1e-6 * std::max(1.0, std::abs(eval.derivatives[b])));
    }
}

TEST_CASE("kan_init shapes, counts and determinism") {
    const KanNetwork net = kan_init({{1, 3, 1}, 5, 3}, 42);
    CHECK(net.layers().size() == 2);
    CHECK(net.parameter_count() == 54);
    // Enumerate edges: each carries G + k coefficients and one base weight.
    Eigen::Index counted = 0;
    for (const KanLayer& layer : net.layers())
        for (int j = 0; j < layer.out_dim; ++j)
            for (int i = 0; i < layer.in_dim; ++i) counted += layer.grid.n_basis() + 1;
    CHECK(counted == 54);

    const KanNetwork wide = kan_init({{2, kan_hidden_width(2), 1}, 5, 3}, 1);
    CHECK(wide.dims()[1] == 5);

    CHECK(kan_init({{1, 3, 1}, 5, 3}, 42).parameters() == net.parameters());
    CHECK(kan_init({{1, 3, 1}, 5, 3}, 43).parameters() != net.parameters());
    CHECK(kan_init({{1, 3, 1}, 5, 3}, 42).instance_id() != net.instance_id());
    CHECK_THROWS_AS(kan_init({{}, 5, 3}, 1), std::invalid_argument);
}

TEST_CASE("zero parameters give zero output and gradient") {
    KanNetwork net = kan_init({{2, 5, 1}, 5, 3}, 3);
    net.parameters().setZero();
    Matrix x = Matrix::Random(30, 2);
    CHECK(net.predict(x).cwiseAbs().maxCoeff() == 0.0);
    CHECK(net.input_gradient(x).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(net.predict(Matrix::Zero(3, 1)), std::invalid_argument);
}

TEST_CASE("identity spline layer") {
    const KanNetwork net = identity_layer();
    const Matrix x = uniform_column(300, -1.0, 1.0, 5);
    CHECK((net.predict(x) - x.col(0)).cwiseAbs().maxCoeff() <= 1e-3);
    const Matrix g = net.input_gradient(uniform_column(300, -0.9, 0.9, 6));
    CHECK((g.array() - 1.0).abs().maxCoeff() <= 1e-2);
}

TEST_CASE("parameter gradients match finite differences") {
    KanNetwork net = kan_init({{2, 5, 1}, 5, 3}, 9);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n01;
    for (Eigen::Index q = 0; q < net.parameter_count(); ++q) net.parameters()[q] += 0.3 * n01(rng);
    Matrix x = Matrix::Random(64, 2) * 3.0 + Matrix::Constant(64, 2, 100.0);
    Vector y = Vector::Random(64);
    net.fit_normalization(x, y);

    Vector grad;
    net.loss_and_gradient(x, y, grad);
    std::uniform_int_distribution<Eigen::Index> pick(0, net.parameter_count() - 1);
    Vector scratch;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index q = pick(rng);
        const double h = 1e-6;
        const double saved = net.parameters()[q];
        net.parameters()[q] = saved + h;
        const double up = net.loss_and_gradient(x, y, scratch);
        net.parameters()[q] = saved - h;
        const double down = net.loss_and_gradient(x, y, scratch);
        net.parameters()[q] = saved;
        const double fd = (up - down) / (2 * h);
        CHECK(std::abs(fd - grad[q]) <= 1e-5 * std::max(std::abs(grad[q]), 1e-4));
    }
}

TEST_CASE("input gradients match finite differences") {
    KanNetwork net = kan_init({{2, 5, 1}, 5, 3}, 10);
    Matrix x = Matrix::Random(200, 2) * 5.0 + Matrix::Constant(200, 2, 100.0);
    Vector y = (x.col(0) - x.col(1)).array().sin().matrix();
    TrainConfig cfg;
    cfg.epochs = 50;
    kan_train(net, x, y, cfg);
    const Matrix g = net.input_gradient(x);
    for (int i = 0; i < 2; ++i) {
        Matrix up = x, down = x;
        up.col(i).array() += 1e-5;
        down.col(i).array() -= 1e-5;
        const Vector fd = (net.predict(up) - net.predict(down)) / 2e-5;
        for (Eigen::Index r = 0; r < x.rows(); ++r)
            CHECK(std::abs(fd[r] - g(r, i)) <= 1e-4 * std::max(std::abs(g(r, i)), 1e-2));
    }
}

TEST_CASE("kan_train fits simple targets") {
    TrainConfig cfg;
    cfg.epochs = 1000;
    cfg.early_stop_patience = 200;
    SUBCASE("constant") {
        KanNetwork net = kan_init({{1, 3, 1}, 5, 3}, 1);
        const Matrix x = uniform_column(500, 3.0, 5.0, 1);
        const auto diag = kan_train(net, x, Vector::Constant(500, 0.37), cfg);
        CHECK(diag.final_mse <= 1e-6);
        CHECK(diag.final_mse < diag.initial_mse);
    }
    SUBCASE("linear") {
        KanNetwork net = kan_init({{1, 3, 1}, 5, 3}, 2);
        const Matrix x = uniform_column(1000, 0.0, 1.0, 2);
        const Vector y = (2.0 * x.col(0).array() + 1.0).matrix();
        const auto diag = kan_train(net, x, y, cfg);
        CHECK(diag.final_mse <= 1e-5);
    }
    SUBCASE("sine") {
        KanNetwork net = kan_init({{1, 3, 1}, 5, 3}, 3);
        const Matrix x = uniform_column(2000, -1.0, 1.0, 3);
        const Vector y = (3.0 * x.col(0).array()).sin().matrix();
        const auto diag = kan_train(net, x, y, cfg);
        CHECK(diag.final_mse <= 1e-3);
        const Vector pred = net.predict(x);
        CHECK((pred - y).squaredNorm() / 2000.0 == doctest::Approx(diag.final_mse));
    }
}

TEST_CASE("kan training is deterministic and aborts on divergence") {
    const Matrix x = uniform_column(300, 0.0, 1.0, 8);
    const Vector y = x.col(0).array().square().matrix();
    TrainConfig cfg;
    cfg.epochs = 40;
    KanNetwork a = kan_init({{1, 3, 1}, 5, 3}, 5), b = kan_init({{1, 3, 1}, 5, 3}, 5);
    kan_train(a, x, y, cfg);
    kan_train(b, x, y, cfg);
    CHECK(a.parameters() == b.parameters());

    TrainConfig wild = cfg;
    wild.learning_rate = 1e300;
    KanNetwork c = kan_init({{1, 3, 1}, 5, 3}, 5);
    CHECK_THROWS_AS(kan_train(c, x, y, wild), NumericFailure);
}

TEST_CASE("kan save and load round trip") {
    KanNetwork net = kan_init({{2, 5, 1}, 5, 3}, 12);
    Matrix x = Matrix::Random(50, 2);
    net.fit_normalization(x, x.col(0));
    net.trained = true;
    std::stringstream buffer;
    net.save(buffer);
    const KanNetwork back = KanNetwork::load(buffer);
    CHECK(back.parameters() == net.parameters());
    CHECK(back.predict(x) == net.predict(x));
    CHECK(back.trained);
    std::stringstream junk("kanop-mlp 1");
    CHECK_THROWS(KanNetwork::load(junk));
}

TEST_CASE("local bspline evaluation matches the full recursion") {
    for (auto [order, uniform] : {std::pair{1, true}, {2, true}, {3, true}, {5, true}, {3, false}, {2, false}}) {
        SplineGrid grid = make_uniform_grid(-1.0, 1.0, 5, order);
        grid.uniform = uniform;
        const int nb = grid.n_basis();
        std::mt19937_64 rng(31 + order);
        std::uniform_real_distribution<double> u(-3.0, 3.0);
        std::vector<double> xs{-1.0, 1.0, 0.2, -0.6, grid.knots.front(), grid.knots.back()};
        for (int i = 0; i < 400; ++i) xs.push_back(u(rng));
        for (double x : xs) {
            Vector v(nb), d(nb), vf(nb), df(nb);
            bspline_basis(grid, x, v.data(), d.data());
            detail::bspline_basis_full(grid, x, vf.data(), df.data());
            CHECK((v - vf).cwiseAbs().maxCoeff() <= 1e-14);
            CHECK((d - df).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}
