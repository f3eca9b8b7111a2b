#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kanop/continuation.hpp"
#include "kanop/linalg.hpp"
#include "kanop/market.hpp"
#include "kanop/products.hpp"

namespace kanop {

/// One live cashflow per path: `amount` paid at step `date`.
struct CashflowState {
    Vector amount;
    Eigen::VectorXi date;

    Eigen::Index n_paths() const { return amount.size(); }
};

/// Each path's live cashflow discounted back to step k.
Vector regression_targets(const CashflowState& state, int k, double r_y, double dt_years);

struct LsmcConfig {
    double rate = 0.0;             // annualized, continuously compounded
    bool itm_only = false;         // classic fit population instead of all paths
    std::vector<int> dump_dates;   // steps whose fitted curve is recorded
    /// Optional true continuation value for dumps: (features, step) -> values.
    std::function<Vector(const Matrix&, int)> true_continuation;
    /// Invoked after every induction step with the updated state.
    std::function<void(int, const CashflowState&)> on_step;
};

struct PricingResult {
    double price = 0.0;
    double std_error = 0.0;
    Eigen::Index n_paths = 0;
    std::uint64_t seed = 0;
    std::string model_kind;
    std::vector<double> exercise_fraction;  // indexed by step; zero where no decision is taken
    std::vector<double> fit_mse;            // indexed by step; NaN where no model was fitted
};

struct FitCurve {
    int date = 0;
    Matrix features;
    Vector fitted;
    std::optional<Vector> truth;
};

using FitCurveDump = std::vector<FitCurve>;

struct LsmcRun {
    PricingResult result;
    FitCurveDump dump;
    CashflowState final_state;
    /// Regression targets at the first exercise date, before its exercise decision.
    Vector first_date_targets;
    /// instance_id() of every model used, in induction order.
    std::vector<std::uint64_t> model_instances;
};

/// Backward-induction least-squares Monte Carlo. The terminal cashflow is
/// the positive part of the payoff; at every earlier exercise date (last
/// to first) a fresh model is fitted to the discounted future cashflows
/// and a path exercises iff its intrinsic value is positive and strictly
/// above the fitted continuation value. All-zero targets skip the fit and
/// use a zero continuation value.
LsmcRun lsmc_price(const PathSet& paths, const Product& product, const ModelFactory& factory,
                   const LsmcConfig& cfg);

/// European-style exercise of the same payoff: discounted mean of the
/// positive-part payoff at maturity.
PricingResult eurasian_price(const PathSet& paths, const Product& product, double rate);

/// Columns: path_id, date_index, feature_1[, feature_2], f_hat, f_true (blank when unknown).
void write_fit_curve_csv(const FitCurve& curve, const std::string& file);

}  // namespace kanop
