#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kanop/continuation.hpp"
#include "kanop/market.hpp"
#include "kanop/products.hpp"

namespace kanop {

/// Invalid or unknown configuration entry; what() names the field.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// One fully resolved run: market, contract, regressor and Monte Carlo setup.
struct ExperimentConfig {
    std::string preset;  // preset the values started from, informational
    MarketSpec market;
    ProductKind product = ProductKind::american_put;
    int exercise_stride = 1;  // simulation steps between exercise dates
    TwapConvention twap = TwapConvention::exclude_t0;
    ModelSpec model;
    Eigen::Index n_paths = 10000;
    int mlp_path_multiplier = 10;  // the MLP trains on this many times the shared paths
    std::uint64_t seed = 42;
    bool itm_only = false;
    std::vector<int> dump_dates;
    std::string out_dir = "kanop_out";

    /// Throws ConfigError naming the first invalid field.
    void validate() const;

    Product make_product() const;
    /// Paths used by the configured model: the shared set, or the MLP superset.
    Eigen::Index model_paths() const;
};

/// Every key accepted in a config file, in the order they are written.
const std::vector<std::string>& config_keys();

/// Names accepted by preset_config.
const std::vector<std::string>& preset_names();

/// table1, table2 (column 1), table2-1 .. table2-4, euro-delta, degenerate, deep-itm-put.
ExperimentConfig preset_config(std::string_view name);

/// `key = value` lines, `#` comments. A `preset` key is applied before the
/// other keys wherever it appears. Unknown keys are rejected.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& file);

/// Complete config text; parse_config(to_config_text(c)) reproduces c.
std::string to_config_text(const ExperimentConfig& cfg);

/// Applies a single key; throws ConfigError for unknown keys or bad values.
void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value);

}  // namespace kanop
