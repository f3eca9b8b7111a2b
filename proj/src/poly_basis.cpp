#include "kanop/poly_basis.hpp"

#include <limits>
#include <stdexcept>
#include <string>

namespace kanop {

namespace {

std::atomic<std::uint64_t> g_underflow_count{0};

double input_divisor(const BasisSpec& spec) { return spec.normalize_inputs ? spec.input_scale : 1.0; }

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw std::invalid_argument(std::string(what) + " contains non-finite entries");
}

}  // namespace

std::uint64_t weighted_laguerre_underflow_count() { return g_underflow_count.load(); }
void reset_weighted_laguerre_underflow_count() { g_underflow_count.store(0); }
void note_weighted_laguerre_underflow() { g_underflow_count.fetch_add(1, std::memory_order_relaxed); }

void BasisSpec::validate(Eigen::Index n_inputs) const {
    if (order < 1) throw std::invalid_argument("basis order must be at least 1");
    if (n_inputs < 1 || n_inputs > 2) throw std::invalid_argument("basis supports one or two inputs");
    if (cross_products && n_inputs != 2) throw std::invalid_argument("cross products need exactly two inputs");
    if (normalize_inputs && !(input_scale > 0.0)) throw std::invalid_argument("input_scale must be positive");
}

Eigen::Index design_width(const BasisSpec& spec, Eigen::Index n_inputs) {
    spec.validate(n_inputs);
    Eigen::Index width = 1 + n_inputs * spec.order;
    if (spec.cross_products) {
        for (int i = 1; i < spec.order; ++i) width += spec.order - i;  // j in [1, p - i]
    }
    return width;
}

Matrix design_matrix(const BasisSpec& spec, const Matrix& features) {
    const Eigen::Index n_inputs = features.cols();
    const Eigen::Index width = design_width(spec, n_inputs);
    const double divisor = input_divisor(spec);
    const Eigen::Index n = features.rows();
    const int p = spec.order;

    Matrix out(n, width);
    Matrix per_input(n, n_inputs * p);  // B_q(x_i) at column i * p + (q - 1)
    for (Eigen::Index row = 0; row < n; ++row) {
        for (Eigen::Index i = 0; i < n_inputs; ++i) {
            const double u = features(row, i) / divisor;
            for (int q = 1; q <= p; ++q) per_input(row, i * p + q - 1) = basis_eval(spec.family, q, u).value;
        }
    }
    out.col(0).setOnes();
    out.middleCols(1, n_inputs * p) = per_input;
    Eigen::Index col = 1 + n_inputs * p;
    if (spec.cross_products) {
        for (int i = 1; i < p; ++i)
            for (int j = 1; i + j <= p; ++j)
                out.col(col++) = per_input.col(i - 1).cwiseProduct(per_input.col(p + j - 1));
    }
    return out;
}

Matrix design_matrix_derivative(const BasisSpec& spec, const Matrix& features, Eigen::Index input) {
    const Eigen::Index n_inputs = features.cols();
    const Eigen::Index width = design_width(spec, n_inputs);
    if (input < 0 || input >= n_inputs) throw std::out_of_range("input index out of range");
    const double divisor = input_divisor(spec);
    const Eigen::Index n = features.rows();
    const int p = spec.order;

    Matrix values(n, n_inputs * p);
    Matrix slopes = Matrix::Zero(n, n_inputs * p);  // d/dx_input of B_q(x_i)
    for (Eigen::Index row = 0; row < n; ++row) {
        for (Eigen::Index i = 0; i < n_inputs; ++i) {
            const double u = features(row, i) / divisor;
            for (int q = 1; q <= p; ++q) {
                const auto b = basis_eval(spec.family, q, u);
                values(row, i * p + q - 1) = b.value;
                if (i == input) slopes(row, i * p + q - 1) = b.derivative / divisor;
            }
        }
    }
    Matrix out = Matrix::Zero(n, width);
    out.middleCols(1, n_inputs * p) = slopes;
    Eigen::Index col = 1 + n_inputs * p;
    if (spec.cross_products) {
        for (int i = 1; i < p; ++i)
            for (int j = 1; i + j <= p; ++j)
                out.col(col++) = slopes.col(i - 1).cwiseProduct(values.col(p + j - 1)) +
                                 values.col(i - 1).cwiseProduct(slopes.col(p + j - 1));
    }
    return out;
}

OlsModel ols_fit(const Matrix& design, const Vector& targets) {
    if (design.rows() != targets.size()) throw std::invalid_argument("design rows and targets differ");
    if (design.rows() < design.cols())
        throw std::invalid_argument("ols_fit needs at least as many observations as columns");
    require_finite(design, "design matrix");
    if (!targets.allFinite()) throw std::invalid_argument("targets contain non-finite entries");

    // Equilibrate columns; raw Hermite columns span many orders of magnitude.
    Vector scale = design.cwiseAbs().colwise().maxCoeff().transpose();
    for (Eigen::Index c = 0; c < scale.size(); ++c)
        if (scale[c] == 0.0) scale[c] = 1.0;
    const Matrix scaled = design * scale.cwiseInverse().asDiagonal();

    OlsModel model;
    model.n_obs = design.rows();
    Eigen::ColPivHouseholderQR<Matrix> qr(scaled);
    const Vector diag = qr.matrixR().diagonal().cwiseAbs();
    const double smallest = diag.tail(1)[0];
    model.condition_diagnostic = smallest > 0.0 ? diag[0] / smallest : std::numeric_limits<double>::infinity();

    Vector beta;
    if (qr.rank() == scaled.cols()) {
        beta = qr.solve(targets);
    } else {
        model.rank_deficient = true;
        beta = Eigen::CompleteOrthogonalDecomposition<Matrix>(scaled).solve(targets);
    }
    model.coefficients = beta.cwiseQuotient(scale);
    if (!model.coefficients.allFinite()) throw std::runtime_error("ols_fit produced non-finite coefficients");
    return model;
}

OlsModel ols_fit(const BasisSpec& spec, const Matrix& features, const Vector& targets) {
    require_finite(features, "features");
    OlsModel model = ols_fit(design_matrix(spec, features), targets);
    model.spec = spec;
    model.n_inputs = features.cols();
    return model;
}

Vector ols_predict(const OlsModel& model, const Matrix& features) {
    if (features.cols() != model.n_inputs) throw std::invalid_argument("feature width mismatch");
    return design_matrix(model.spec, features) * model.coefficients;
}

Matrix ols_input_gradient(const OlsModel& model, const Matrix& features) {
    if (features.cols() != model.n_inputs) throw std::invalid_argument("feature width mismatch");
    Matrix grad(features.rows(), features.cols());
    for (Eigen::Index i = 0; i < features.cols(); ++i)
        grad.col(i) = design_matrix_derivative(model.spec, features, i) * model.coefficients;
    return grad;
}

std::string_view to_string(BasisFamily family) {
    switch (family) {
        case BasisFamily::laguerre: return "laguerre";
        case BasisFamily::weighted_laguerre: return "weighted_laguerre";
        case BasisFamily::hermite: return "hermite";
        case BasisFamily::monomial: return "monomial";
    }
    return "unknown";
}

BasisFamily parse_basis_family(std::string_view text) {
    if (text == "laguerre") return BasisFamily::laguerre;
    if (text == "weighted_laguerre") return BasisFamily::weighted_laguerre;
    if (text == "hermite") return BasisFamily::hermite;
    if (text == "monomial") return BasisFamily::monomial;
    throw std::invalid_argument("unknown basis family: " + std::string(text));
}

}  // namespace kanop
