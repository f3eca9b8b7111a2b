#pragma once

#include <string_view>
#include <vector>

#include "kanop/linalg.hpp"
#include "kanop/market.hpp"

namespace kanop {

enum class ProductKind { american_put, american_call, asian_american_call };

struct Product {
    ProductKind kind = ProductKind::american_put;
    double strike = 4.0;
    std::vector<int> exercise_dates;  // path-grid step indices, sorted, last = maturity

    int maturity_index() const { return exercise_dates.back(); }
    bool needs_twap() const { return kind == ProductKind::asian_american_call; }
    int n_features() const { return needs_twap() ? 2 : 1; }
    void validate(const PathSet* paths = nullptr) const;
};

/// Exercise dates every `stride` steps up to n_steps, excluding t0.
std::vector<int> exercise_grid(int n_steps, int stride = 1);

/// Signed immediate-exercise payoff: K - S (put), S - K (call),
/// TWAP - K (Asian call).
double intrinsic(const Product& product, double spot, double twap);
inline double intrinsic_positive(const Product& product, double spot, double twap) {
    const double v = intrinsic(product, spot, twap);
    return v > 0.0 ? v : 0.0;
}

/// Signed intrinsic value at step k for every path.
Vector intrinsic_at(const Product& product, const PathSet& paths, int k);

/// Regression features at step k: [S] or [S, TWAP].
Matrix features(const Product& product, const PathSet& paths, int k);

std::string_view to_string(ProductKind kind);
ProductKind parse_product_kind(std::string_view text);

}  // namespace kanop
