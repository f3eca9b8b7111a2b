#include "kanop/continuation.hpp"

#include <atomic>
#include <stdexcept>
#include <string>

#include "kanop/oracle.hpp"
#include "kanop/seed.hpp"

namespace kanop {

namespace {

std::atomic<std::uint64_t> g_next_id{1u << 30};

std::uint64_t next_id() { return g_next_id.fetch_add(1); }

}  // namespace

OlsContinuation::OlsContinuation(BasisSpec spec) : spec_(spec), id_(next_id()) {}

double OlsContinuation::fit(const Matrix& features, const Vector& targets) {
    model_ = ols_fit(spec_, features, targets);
    return (ols_predict(model_, features) - targets).squaredNorm() / double(targets.size());
}

Vector OlsContinuation::predict(const Matrix& features) const { return ols_predict(model_, features); }

Matrix OlsContinuation::input_gradient(const Matrix& features) const { return ols_input_gradient(model_, features); }

KanContinuation::KanContinuation(const KanShape& shape, TrainConfig cfg)
    : net_(kan_init(shape, cfg.seed)), cfg_(cfg) {}

double KanContinuation::fit(const Matrix& features, const Vector& targets) {
    diag_ = kan_train(net_, features, targets, cfg_);
    return diag_.final_mse;
}

MlpContinuation::MlpContinuation(const std::vector<int>& dims, Activation activation, TrainConfig cfg)
    : net_(mlp_init(dims, activation, cfg.seed)), cfg_(cfg) {}

double MlpContinuation::fit(const Matrix& features, const Vector& targets) {
    diag_ = mlp_train(net_, features, targets, cfg_);
    return diag_.final_mse;
}

FunctionContinuation::FunctionContinuation(ValueFn value, GradientFn gradient)
    : value_(std::move(value)), gradient_(std::move(gradient)), id_(next_id()) {}

double FunctionContinuation::fit(const Matrix& features, const Vector& targets) {
    return (value_(features) - targets).squaredNorm() / double(targets.size());
}

bool is_basis_model(ModelKind kind) {
    return kind == ModelKind::weighted_laguerre || kind == ModelKind::hermite || kind == ModelKind::laguerre ||
           kind == ModelKind::laguerre_cross;
}

BasisSpec basis_spec(const ModelSpec& spec, int n_inputs, double spot) {
    BasisSpec out;
    switch (spec.kind) {
        case ModelKind::weighted_laguerre: out.family = BasisFamily::weighted_laguerre; break;
        case ModelKind::hermite: out.family = BasisFamily::hermite; break;
        case ModelKind::laguerre:
        case ModelKind::laguerre_cross: out.family = BasisFamily::laguerre; break;
        default: throw std::invalid_argument("model kind has no polynomial basis");
    }
    out.order = spec.basis_order;
    out.cross_products = spec.kind == ModelKind::laguerre_cross;
    out.normalize_inputs = spec.normalize_inputs;
    out.input_scale = spot;
    out.validate(n_inputs);
    return out;
}

KanShape kan_shape(const ModelSpec& spec, int n_inputs) {
    const int hidden = spec.kan_hidden > 0 ? spec.kan_hidden : kan_hidden_width(n_inputs);
    return KanShape{{n_inputs, hidden, 1}, spec.kan_grid, spec.kan_order};
}

std::vector<int> mlp_dims(const ModelSpec& spec, int n_inputs) {
    std::vector<int> dims{n_inputs};
    dims.insert(dims.end(), spec.mlp_hidden.begin(), spec.mlp_hidden.end());
    dims.push_back(1);
    return dims;
}

ModelFactory make_oracle_factory(const Product& product, const MarketSpec& market) {
    if (product.kind == ProductKind::asian_american_call)
        throw std::invalid_argument("no closed-form continuation value for asian products");
    const OptionKind option = product.kind == ProductKind::american_put ? OptionKind::put : OptionKind::call;
    const int maturity = product.maturity_index();
    return [=](int date) -> std::unique_ptr<ContinuationModel> {
        BsInputs base{market.spot, product.strike, market.sigma_y, market.r_y, market.div_y,
                      (maturity - date) * market.dt_years(), option};
        auto value = [base](const Matrix& x) {
            Vector out(x.rows());
            BsInputs in = base;
            for (Eigen::Index r = 0; r < x.rows(); ++r) {
                in.s = x(r, 0);
                out[r] = bs_price(in);
            }
            return out;
        };
        auto gradient = [base](const Matrix& x) {
            Matrix out(x.rows(), 1);
            BsInputs in = base;
            for (Eigen::Index r = 0; r < x.rows(); ++r) {
                in.s = x(r, 0);
                out(r, 0) = bs_delta(in);
            }
            return out;
        };
        return std::make_unique<FunctionContinuation>(value, gradient);
    };
}

ModelFactory make_model_factory(const ModelSpec& spec, const Product& product, const MarketSpec& market) {
    const int n_inputs = product.n_features();
    if (spec.kind == ModelKind::oracle) return make_oracle_factory(product, market);
    if (is_basis_model(spec.kind)) {
        const BasisSpec basis = basis_spec(spec, n_inputs, market.spot);
        return [basis](int) { return std::make_unique<OlsContinuation>(basis); };
    }
    spec.train.validate();
    if (spec.kind == ModelKind::kan) {
        const KanShape shape = kan_shape(spec, n_inputs);
        const TrainConfig train = spec.train;
        return [shape, train](int date) {
            TrainConfig cfg = train;
            cfg.seed = mix_seed(train.seed, static_cast<std::uint64_t>(date));
            return std::make_unique<KanContinuation>(shape, cfg);
        };
    }
    const std::vector<int> dims = mlp_dims(spec, n_inputs);
    const Activation act = spec.mlp_activation;
    const TrainConfig train = spec.train;
    return [dims, act, train](int date) {
        TrainConfig cfg = train;
        cfg.seed = mix_seed(train.seed, static_cast<std::uint64_t>(date));
        return std::make_unique<MlpContinuation>(dims, act, cfg);
    };
}

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::weighted_laguerre: return "weighted_laguerre";
        case ModelKind::hermite: return "hermite";
        case ModelKind::laguerre: return "laguerre";
        case ModelKind::laguerre_cross: return "laguerre_cross";
        case ModelKind::kan: return "kan";
        case ModelKind::mlp: return "mlp";
        case ModelKind::oracle: return "oracle";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view text) {
    for (ModelKind kind : {ModelKind::weighted_laguerre, ModelKind::hermite, ModelKind::laguerre,
                           ModelKind::laguerre_cross, ModelKind::kan, ModelKind::mlp, ModelKind::oracle})
        if (text == to_string(kind)) return kind;
    throw std::invalid_argument("unknown model: " + std::string(text));
}

}  // namespace kanop
