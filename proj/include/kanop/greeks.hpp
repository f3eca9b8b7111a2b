#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "kanop/continuation.hpp"
#include "kanop/lsmc.hpp"
#include "kanop/market.hpp"
#include "kanop/oracle.hpp"
#include "kanop/products.hpp"

namespace kanop {

struct DeltaResult {
    double delta = 0.0;
    double std_error = 0.0;
    Eigen::Index n_paths = 0;
    std::string model_kind;
    double intrinsic_fraction = 0.0;  // share of paths valued on the exercise branch at t1
};

/// Spec used for the t1 regression: polynomial bases get twice the
/// pricing order, networks keep their pricing architecture.
ModelSpec t1_model_spec(const ModelSpec& pricing);

/// Fits a fresh model at the first exercise date on every path, against
/// the discounted realized cashflows of a completed LSMC run.
std::unique_ptr<ContinuationModel> fit_t1_model(const PathSet& paths, const Product& product,
                                                const ModelSpec& pricing, const MarketSpec& market,
                                                const Vector& t1_targets);

/// Pathwise delta through V(t1) = max(F_hat, intrinsic):
///   mean over paths of e^{-r t1} dV/dS_t1 * S_t1 / S_0,
/// with dV/dS_t1 from the model gradient on the continuation branch and
/// +-1 on the exercise branch. `allow_exercise` = false values every
/// path on the continuation branch (European contracts). Vanilla
/// products only.
DeltaResult delta_estimate(const PathSet& paths, const Product& product, const ContinuationModel& t1_model,
                           const MarketSpec& market, bool allow_exercise = true);

/// European-call reference setup: S0 = 100, K = 102, 30 daily steps,
/// sigma = 20%, r = q = 0, 250-day basis.
MarketSpec euro_delta_market();

/// Runs delta_estimate with F_hat(t1) replaced by the closed-form European
/// value at the remaining maturity, so no learned model is involved.
DeltaResult perfect_fit_delta_check(const MarketSpec& market, OptionKind kind, Eigen::Index n_paths,
                                    std::uint64_t seed);

}  // namespace kanop
