#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "kanop/kan.hpp"
#include "kanop/linalg.hpp"
#include "kanop/market.hpp"
#include "kanop/mlp.hpp"
#include "kanop/poly_basis.hpp"
#include "kanop/products.hpp"
#include "kanop/train.hpp"

namespace kanop {

/// Regressor for the expected discounted continuation value at one
/// exercise date.
class ContinuationModel {
public:
    virtual ~ContinuationModel() = default;

    /// Returns the in-sample mean squared error.
    virtual double fit(const Matrix& features, const Vector& targets) = 0;
    virtual Vector predict(const Matrix& features) const = 0;
    /// d prediction / d raw feature, one column per input.
    virtual Matrix input_gradient(const Matrix& features) const = 0;
    virtual std::string_view kind() const = 0;
    /// Distinct for every freshly initialized underlying model.
    virtual std::uint64_t instance_id() const = 0;
};

class OlsContinuation final : public ContinuationModel {
public:
    explicit OlsContinuation(BasisSpec spec);
    double fit(const Matrix& features, const Vector& targets) override;
    Vector predict(const Matrix& features) const override;
    Matrix input_gradient(const Matrix& features) const override;
    std::string_view kind() const override { return "ols"; }
    std::uint64_t instance_id() const override { return id_; }
    const OlsModel& model() const { return model_; }

private:
    BasisSpec spec_;
    OlsModel model_;
    std::uint64_t id_;
};

class KanContinuation final : public ContinuationModel {
public:
    KanContinuation(const KanShape& shape, TrainConfig cfg);
    double fit(const Matrix& features, const Vector& targets) override;
    Vector predict(const Matrix& features) const override { return net_.predict(features); }
    Matrix input_gradient(const Matrix& features) const override { return net_.input_gradient(features); }
    std::string_view kind() const override { return "kan"; }
    std::uint64_t instance_id() const override { return net_.instance_id(); }
    const KanNetwork& network() const { return net_; }
    const TrainDiagnostics& diagnostics() const { return diag_; }

private:
    KanNetwork net_;
    TrainConfig cfg_;
    TrainDiagnostics diag_;
};

class MlpContinuation final : public ContinuationModel {
public:
    MlpContinuation(const std::vector<int>& dims, Activation activation, TrainConfig cfg);
    double fit(const Matrix& features, const Vector& targets) override;
    Vector predict(const Matrix& features) const override { return net_.predict(features); }
    Matrix input_gradient(const Matrix& features) const override { return net_.input_gradient(features); }
    std::string_view kind() const override { return "mlp"; }
    std::uint64_t instance_id() const override { return net_.instance_id(); }
    const MlpNetwork& network() const { return net_; }
    const TrainDiagnostics& diagnostics() const { return diag_; }

private:
    MlpNetwork net_;
    TrainConfig cfg_;
    TrainDiagnostics diag_;
};

/// Fixed function standing in for a fitted model; fit() only reports the MSE.
class FunctionContinuation final : public ContinuationModel {
public:
    using ValueFn = std::function<Vector(const Matrix&)>;
    using GradientFn = std::function<Matrix(const Matrix&)>;

    FunctionContinuation(ValueFn value, GradientFn gradient);
    double fit(const Matrix& features, const Vector& targets) override;
    Vector predict(const Matrix& features) const override { return value_(features); }
    Matrix input_gradient(const Matrix& features) const override { return gradient_(features); }
    std::string_view kind() const override { return "oracle"; }
    std::uint64_t instance_id() const override { return id_; }

private:
    ValueFn value_;
    GradientFn gradient_;
    std::uint64_t id_;
};

/// Creates a fresh model for the exercise date with the given step index.
using ModelFactory = std::function<std::unique_ptr<ContinuationModel>(int date_index)>;

enum class ModelKind { weighted_laguerre, hermite, laguerre, laguerre_cross, kan, mlp, oracle };

struct ModelSpec {
    ModelKind kind = ModelKind::kan;
    int basis_order = 6;
    bool normalize_inputs = false;
    int kan_hidden = 0;  // 0 selects the 2n + 1 rule
    int kan_grid = 5;
    int kan_order = 3;
    std::vector<int> mlp_hidden{32, 32};
    Activation mlp_activation = Activation::relu;
    TrainConfig train;
};

bool is_basis_model(ModelKind kind);
BasisSpec basis_spec(const ModelSpec& spec, int n_inputs, double spot);
KanShape kan_shape(const ModelSpec& spec, int n_inputs);
std::vector<int> mlp_dims(const ModelSpec& spec, int n_inputs);

/// Per-date models seeded from (train.seed, date index). The oracle kind
/// needs the market and is only defined for vanilla products.
ModelFactory make_model_factory(const ModelSpec& spec, const Product& product, const MarketSpec& market);

/// Black-Scholes European value (and delta) at step k with the remaining
/// time to the product's maturity; the true continuation value whenever
/// early exercise is never optimal.
ModelFactory make_oracle_factory(const Product& product, const MarketSpec& market);

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

}  // namespace kanop
