#include "kanop/products.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace kanop {

void Product::validate(const PathSet* paths) const {
    if (!(strike > 0.0)) throw std::invalid_argument("strike must be positive");
    if (exercise_dates.empty()) throw std::invalid_argument("product has no exercise dates");
    if (!std::is_sorted(exercise_dates.begin(), exercise_dates.end()) ||
        std::adjacent_find(exercise_dates.begin(), exercise_dates.end()) != exercise_dates.end())
        throw std::invalid_argument("exercise dates must be strictly increasing");
    if (exercise_dates.front() < 1) throw std::invalid_argument("exercise dates start at step 1");
    if (paths != nullptr) {
        if (maturity_index() != paths->n_steps())
            throw std::invalid_argument("last exercise date must be the path maturity");
        if (needs_twap() && !paths->twap) throw std::invalid_argument("asian product needs a twap channel");
    }
}

std::vector<int> exercise_grid(int n_steps, int stride) {
    if (stride < 1 || n_steps < 1 || n_steps % stride != 0)
        throw std::invalid_argument("exercise stride must divide n_steps");
    std::vector<int> dates;
    for (int k = stride; k <= n_steps; k += stride) dates.push_back(k);
    return dates;
}

double intrinsic(const Product& product, double spot, double twap) {
    switch (product.kind) {
        case ProductKind::american_put: return product.strike - spot;
        case ProductKind::american_call: return spot - product.strike;
        case ProductKind::asian_american_call: return twap - product.strike;
    }
    return 0.0;
}

Vector intrinsic_at(const Product& product, const PathSet& paths, int k) {
    switch (product.kind) {
        case ProductKind::american_put: return (product.strike - paths.prices.col(k).array()).matrix();
        case ProductKind::american_call: return (paths.prices.col(k).array() - product.strike).matrix();
        case ProductKind::asian_american_call:
            if (!paths.twap) throw std::invalid_argument("asian product needs a twap channel");
            return (paths.twap->col(k).array() - product.strike).matrix();
    }
    return {};
}

Matrix features(const Product& product, const PathSet& paths, int k) {
    if (k < 0 || k > paths.n_steps()) throw std::out_of_range("date index outside the path grid");
    if (!product.needs_twap()) return paths.prices.col(k);
    if (!paths.twap) throw std::invalid_argument("asian product needs a twap channel");
    Matrix out(paths.n_paths(), 2);
    out.col(0) = paths.prices.col(k);
    out.col(1) = paths.twap->col(k);
    return out;
}

std::string_view to_string(ProductKind kind) {
    switch (kind) {
        case ProductKind::american_put: return "american_put";
        case ProductKind::american_call: return "american_call";
        case ProductKind::asian_american_call: return "asian_american_call";
    }
    return "unknown";
}

ProductKind parse_product_kind(std::string_view text) {
    if (text == "american_put") return ProductKind::american_put;
    if (text == "american_call") return ProductKind::american_call;
    if (text == "asian_american_call") return ProductKind::asian_american_call;
    throw std::invalid_argument("unknown product: " + std::string(text));
}

}  // namespace kanop
