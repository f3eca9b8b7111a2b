#include "kanop/market.hpp"
#include "kanop/seed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

namespace kanop {

namespace {

void require_finite(double value, const char* field) {
    if (!std::isfinite(value)) throw std::invalid_argument(std::string(field) + " must be finite");
}

void simulate_rows(const MarketSpec& spec, std::uint64_t seed, Eigen::Index first,
                   Eigen::Index last, Matrix& prices) {
    const double dt = spec.dt_years();
    const double drift = (spec.r_y - spec.div_y - 0.5 * spec.sigma_y * spec.sigma_y) * dt;
    const double vol = spec.sigma_y * std::sqrt(dt);
    for (Eigen::Index row = first; row < last; ++row) {
        std::mt19937_64 engine(mix_seed(seed, static_cast<std::uint64_t>(row)));
        std::normal_distribution<double> normal;
        double log_return = 0.0;
        prices(row, 0) = spec.spot;
        for (int k = 1; k <= spec.n_steps; ++k) {
            log_return += drift + vol * normal(engine);
            prices(row, k) = spec.spot * std::exp(log_return);
        }
    }
}

}  // namespace

void MarketSpec::validate() const {
    require_finite(spot, "spot");
    require_finite(strike, "strike");
    require_finite(sigma_y, "sigma");
    require_finite(r_y, "rate");
    require_finite(div_y, "dividend");
    if (spot <= 0.0) throw std::invalid_argument("spot must be positive");
    if (strike <= 0.0) throw std::invalid_argument("strike must be positive");
    if (sigma_y < 0.0) throw std::invalid_argument("sigma must be non-negative");
    if (n_steps < 1) throw std::invalid_argument("n_steps must be at least 1");
    if (periods_per_year < 1) throw std::invalid_argument("periods_per_year must be at least 1");
}

PathSet simulate_gbm(const MarketSpec& spec, Eigen::Index n_paths, std::uint64_t seed) {
    spec.validate();
    if (n_paths < 1) throw std::invalid_argument("n_paths must be at least 1");

    PathSet out;
    out.prices.resize(n_paths, spec.n_steps + 1);
    out.dt_years = spec.dt_years();
    out.seed = seed;

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const auto n_workers = static_cast<Eigen::Index>(
        std::min<Eigen::Index>(hw, std::max<Eigen::Index>(1, n_paths / 4096)));
    if (n_workers == 1) {
        simulate_rows(spec, seed, 0, n_paths, out.prices);
        return out;
    }
    std::vector<std::jthread> workers;
    const Eigen::Index block = (n_paths + n_workers - 1) / n_workers;
    for (Eigen::Index w = 0; w < n_workers; ++w) {
        const Eigen::Index first = w * block;
        const Eigen::Index last = std::min(n_paths, first + block);
        if (first >= last) break;
        workers.emplace_back([&, first, last] { simulate_rows(spec, seed, first, last, out.prices); });
    }
    return out;
}

PathSet augment_twap(PathSet paths, TwapConvention convention) {
    const Eigen::Index n = paths.prices.rows();
    const Eigen::Index cols = paths.prices.cols();
    Matrix twap(n, cols);
    twap.col(0) = paths.prices.col(0);
    Vector running = convention == TwapConvention::include_t0 ? Vector(paths.prices.col(0))
                                                              : Vector::Zero(n);
    for (Eigen::Index k = 1; k < cols; ++k) {
        running += paths.prices.col(k);
        const double count = convention == TwapConvention::include_t0 ? double(k + 1) : double(k);
        twap.col(k) = running / count;
    }
    paths.twap = std::move(twap);
    return paths;
}

void write_paths_csv(const PathSet& paths, const std::string& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot open " + file);
    out.precision(17);
    for (int k = 0; k <= paths.n_steps(); ++k) out << (k ? "," : "") << k;
    out << '\n';
    for (Eigen::Index row = 0; row < paths.n_paths(); ++row) {
        for (int k = 0; k <= paths.n_steps(); ++k) out << (k ? "," : "") << paths.prices(row, k);
        out << '\n';
    }
}

std::string_view to_string(StepUnit unit) { return unit == StepUnit::day ? "day" : "week"; }

std::string_view to_string(TwapConvention convention) {
    return convention == TwapConvention::include_t0 ? "include_t0" : "exclude_t0";
}

StepUnit parse_step_unit(std::string_view text) {
    if (text == "day") return StepUnit::day;
    if (text == "week") return StepUnit::week;
    throw std::invalid_argument("step_unit must be day or week");
}

TwapConvention parse_twap_convention(std::string_view text) {
    if (text == "include_t0") return TwapConvention::include_t0;
    if (text == "exclude_t0") return TwapConvention::exclude_t0;
    throw std::invalid_argument("twap_convention must be include_t0 or exclude_t0");
}

}  // namespace kanop
