#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "kanop/linalg.hpp"

namespace kanop {

enum class StepUnit { day, week };

/// Contract and market parameters for a single-asset GBM world.
struct MarketSpec {
    double spot = 100.0;
    double strike = 100.0;
    double sigma_y = 0.2;   // annualized volatility
    double r_y = 0.0;       // continuously compounded risk-free rate
    double div_y = 0.0;     // continuous dividend yield
    int n_steps = 50;       // simulation steps to maturity
    StepUnit step_unit = StepUnit::day;
    int periods_per_year = 252;

    double dt_years() const { return 1.0 / periods_per_year; }
    double maturity_years() const { return n_steps * dt_years(); }

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

enum class TwapConvention { include_t0, exclude_t0 };

/// Simulated price matrix; row = path, column = step index (column 0 is t0).
/// Immutable once built.
struct PathSet {
    Matrix prices;
    std::optional<Matrix> twap;
    double dt_years = 0.0;
    std::uint64_t seed = 0;

    Eigen::Index n_paths() const { return prices.rows(); }
    int n_steps() const { return static_cast<int>(prices.cols()) - 1; }
    double spot() const { return prices(0, 0); }
};

/// Exact log-Euler GBM paths. Each path draws from its own generator
/// derived from (seed, path index), so the first m rows of an n-path run
/// equal an m-path run with the same seed, and threading never changes
/// the output.
PathSet simulate_gbm(const MarketSpec& spec, Eigen::Index n_paths, std::uint64_t seed);

/// Returns a copy of `paths` carrying the running arithmetic average.
/// exclude_t0 averages prices[1..k] and pins twap[0] to the spot.
PathSet augment_twap(PathSet paths, TwapConvention convention);

inline double discount_factor(double r_y, double dt_years) { return std::exp(-r_y * dt_years); }

/// Header row of step indices, one row per path.
void write_paths_csv(const PathSet& paths, const std::string& file);

std::string_view to_string(StepUnit unit);
std::string_view to_string(TwapConvention convention);
StepUnit parse_step_unit(std::string_view text);
TwapConvention parse_twap_convention(std::string_view text);

}  // namespace kanop
