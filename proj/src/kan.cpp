#include "kanop/kan.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>

namespace kanop {

namespace {

std::atomic<std::uint64_t> g_next_instance{1};

// Row kernels over the nonzero basis window. W is the window width when
// known at compile time (cubic splines), 0 for the runtime width w.
template <int W>
void spline_accumulate(const Eigen::VectorXi& first, const RowMatrix& value, const double* coef, double* out, int w) {
    const int width = W > 0 ? W : w;
    for (Eigen::Index r = 0; r < first.size(); ++r) {
        const double* v = value.data() + r * width;
        const double* cf = coef + first[r];
        double acc = 0.0;
        for (int q = 0; q < width; ++q) acc += v[q] * cf[q];
        out[r] += acc;
    }
}

template <int W>
void spline_scatter(const Eigen::VectorXi& first, const RowMatrix& value, const double* u, double* grad, int w) {
    const int width = W > 0 ? W : w;
    for (Eigen::Index r = 0; r < first.size(); ++r) {
        const double* v = value.data() + r * width;
        double* g = grad + first[r];
        for (int q = 0; q < width; ++q) g[q] += u[r] * v[q];
    }
}

template <int W>
void spline_chain(const Eigen::VectorXi& first, const RowMatrix& deriv, const double* coef, const double* u, double* down,
                  int w) {
    const int width = W > 0 ? W : w;
    for (Eigen::Index r = 0; r < first.size(); ++r) {
        const double* dv = deriv.data() + r * width;
        const double* cf = coef + first[r];
        double acc = 0.0;
        for (int q = 0; q < width; ++q) acc += dv[q] * cf[q];
        down[r] += u[r] * acc;
    }
}

}  // namespace

Eigen::Map<Vector> KanNetwork::spline_coef(std::size_t layer, int j, int i) {
    const KanLayer& l = layers_.at(layer);
    const int nb = l.grid.n_basis();
    return Eigen::Map<Vector>(params_.data() + l.offset + (Eigen::Index(j) * l.in_dim + i) * nb, nb);
}

Eigen::Map<const Vector> KanNetwork::spline_coef(std::size_t layer, int j, int i) const {
    const KanLayer& l = layers_.at(layer);
    const int nb = l.grid.n_basis();
    return Eigen::Map<const Vector>(params_.data() + l.offset + (Eigen::Index(j) * l.in_dim + i) * nb, nb);
}

double& KanNetwork::base_weight(std::size_t layer, int j, int i) {
    const KanLayer& l = layers_.at(layer);
    return params_[l.offset + l.spline_size() + Eigen::Index(j) * l.in_dim + i];
}

double KanNetwork::base_weight(std::size_t layer, int j, int i) const {
    const KanLayer& l = layers_.at(layer);
    return params_[l.offset + l.spline_size() + Eigen::Index(j) * l.in_dim + i];
}

KanNetwork kan_init(const KanShape& shape, std::uint64_t seed) {
    if (shape.dims.size() < 2) throw std::invalid_argument("KAN needs at least input and output dims");
    for (int d : shape.dims)
        if (d < 1) throw std::invalid_argument("KAN layer widths must be positive");

    KanNetwork net;
    net.dims_ = shape.dims;
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l + 1 < shape.dims.size(); ++l) {
        KanLayer layer;
        layer.in_dim = shape.dims[l];
        layer.out_dim = shape.dims[l + 1];
        layer.grid = make_uniform_grid(-1.0, 1.0, shape.grid_intervals, shape.spline_order);
        layer.offset = offset;
        offset += layer.parameter_count();
        net.layers_.push_back(std::move(layer));
    }
    net.params_.resize(offset);

    std::mt19937_64 engine(seed);
    std::normal_distribution<double> normal;
    for (const KanLayer& layer : net.layers_) {
        const double coef_std = 0.1 / std::sqrt(double(layer.grid.n_basis()));
        const double base_std = 1.0 / std::sqrt(double(layer.in_dim));
        double* p = net.params_.data() + layer.offset;
        for (Eigen::Index q = 0; q < layer.spline_size(); ++q) p[q] = coef_std * normal(engine);
        for (Eigen::Index q = 0; q < layer.base_size(); ++q) p[layer.spline_size() + q] = base_std * normal(engine);
    }
    const int n_in = shape.dims.front();
    net.input_shift = Vector::Zero(n_in);
    net.input_scale = Vector::Ones(n_in);
    net.instance_id_ = g_next_instance.fetch_add(1);
    return net;
}

void KanNetwork::fit_normalization(const Matrix& features, const Vector& targets) {
    const Eigen::Index n_in = features.cols();
    input_shift.resize(n_in);
    input_scale.resize(n_in);
    for (Eigen::Index i = 0; i < n_in; ++i) {
        const double lo = features.col(i).minCoeff();
        const double hi = features.col(i).maxCoeff();
        input_shift[i] = 0.5 * (lo + hi);
        input_scale[i] = hi > lo ? 2.0 / (hi - lo) : 0.0;
    }
    const double mean = targets.mean();
    const double var = (targets.array() - mean).square().mean();
    output_shift = mean;
    output_scale = var > 1e-24 * std::max(1.0, mean * mean) ? std::sqrt(var) : 1.0;
}

Matrix KanNetwork::normalize(const Matrix& features) const {
    if (features.cols() != dims_.front()) throw std::invalid_argument("feature width does not match KAN input dim");
    return (features.rowwise() - input_shift.transpose()) * input_scale.asDiagonal();
}

void KanNetwork::evaluate_layer(const SplineGrid& grid, const Matrix& a, bool derivs, bool silu_derivs,
                                std::vector<SparseBasis>& basis, Matrix& silu, Matrix& silu_deriv) {
    const Eigen::Index n = a.rows();
    const int w = grid.order + 1;
    silu.resize(n, a.cols());
    if (silu_derivs) silu_deriv.resize(n, a.cols());
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
        for (Eigen::Index r = 0; r < n; ++r) {
            const double x = a(r, i);
            const double sig = 1.0 / (1.0 + std::exp(-x));
            silu(r, i) = x * sig;
            if (silu_derivs) silu_deriv(r, i) = sig * (1.0 + x * (1.0 - sig));
        }
    }
    basis.resize(std::size_t(a.cols()));
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
        SparseBasis& b = basis[std::size_t(i)];
        b.first.resize(n);
        b.value.resize(n, w);
        if (derivs) b.deriv.resize(n, w);
        const double* x = a.col(i).data();
        if (grid.uniform && grid.order == 3) {
            // Inline uniform cubic pieces for interior spans; the rest go
            // through the general window.
            const double h = (grid.hi - grid.lo) / grid.n_intervals;
            const double inv_h = 1.0 / h;
            const double t0 = grid.knots.front();
            const int last_local = grid.n_basis() - w;
            for (Eigen::Index r = 0; r < n; ++r) {
                const double pos = (x[r] - t0) * inv_h;
                const int s = pos >= 0.0 ? static_cast<int>(pos) : -1;
                const int local = s - 3;
                if (local < 0 || local > last_local) {
                    b.first[r] = bspline_window(grid, x[r], &b.value(r, 0), derivs ? &b.deriv(r, 0) : nullptr);
                    continue;
                }
                const double u = pos - s, v = 1.0 - u, u2 = u * u, u3 = u2 * u;
                double* val = &b.value(r, 0);
                val[0] = v * v * v / 6.0;
                val[1] = (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0;
                val[2] = (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0;
                val[3] = u3 / 6.0;
                if (derivs) {
                    double* der = &b.deriv(r, 0);
                    der[0] = -0.5 * v * v * inv_h;
                    der[1] = (1.5 * u2 - 2.0 * u) * inv_h;
                    der[2] = (-1.5 * u2 + u + 0.5) * inv_h;
                    der[3] = 0.5 * u2 * inv_h;
                }
                b.first[r] = local;
            }
            continue;
        }
        for (Eigen::Index r = 0; r < n; ++r)
            b.first[r] = bspline_window(grid, x[r], &b.value(r, 0), derivs ? &b.deriv(r, 0) : nullptr);
    }
}

KanNetwork::LayerCache KanNetwork::input_cache(const Matrix& z, bool with_derivatives) const {
    LayerCache c;
    evaluate_layer(layers_.front().grid, z, with_derivatives, true, c.basis, c.silu, c.silu_deriv);
    c.input = z;
    return c;
}

const Matrix& KanNetwork::forward(const Matrix& z, Workspace& ws, bool keep, bool input_derivatives,
                                  const LayerCache* first) const {
    const std::size_t n_layers = layers_.size();
    ws.caches.resize(keep ? n_layers : 1);
    ws.outs.resize(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        const KanLayer& layer = layers_[l];
        const double* p = params_.data() + layer.offset;
        const int nb = layer.grid.n_basis();
        const int w = layer.grid.order + 1;

        const LayerCache* c = nullptr;
        if (l == 0 && first != nullptr) {
            c = first;
        } else {
            LayerCache& target = ws.caches[keep ? l : 0];
            const bool derivs = keep && (l > 0 || input_derivatives);
            evaluate_layer(layer.grid, l == 0 ? z : ws.outs[l - 1], derivs, keep, target.basis, target.silu,
                           target.silu_deriv);
            c = &target;
        }

        Matrix& out = ws.outs[l];
        out.resize(c->silu.rows(), layer.out_dim);
        for (int j = 0; j < layer.out_dim; ++j) {
            double* o = out.col(j).data();
            for (Eigen::Index r = 0; r < out.rows(); ++r) o[r] = 0.0;
            for (int i = 0; i < layer.in_dim; ++i) {
                const double wb = p[layer.spline_size() + Eigen::Index(j) * layer.in_dim + i];
                const double* sl = c->silu.col(i).data();
                for (Eigen::Index r = 0; r < out.rows(); ++r) o[r] += wb * sl[r];
                const double* coef = p + (Eigen::Index(j) * layer.in_dim + i) * nb;
                const SparseBasis& b = c->basis[std::size_t(i)];
                if (w == 4) spline_accumulate<4>(b.first, b.value, coef, o, w);
                else spline_accumulate<0>(b.first, b.value, coef, o, w);
            }
        }
    }
    return ws.outs.back();
}

const Matrix& KanNetwork::backward(Workspace& ws, const Matrix& seed, Vector* grad, bool want_input,
                                   const LayerCache* first) const {
    ws.downs.resize(layers_.size());
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const KanLayer& layer = layers_[l];
        const LayerCache& c = l == 0 && first != nullptr ? *first : ws.caches[l];
        const Matrix& upstream = l + 1 == layers_.size() ? seed : ws.downs[l + 1];
        const double* p = params_.data() + layer.offset;
        const int nb = layer.grid.n_basis();
        const int w = layer.grid.order + 1;
        const bool need_down = l > 0 || want_input;

        const Eigen::Index n = upstream.rows();
        Matrix& down = ws.downs[l];
        if (need_down) down.setZero(n, layer.in_dim);
        for (int j = 0; j < layer.out_dim; ++j) {
            const double* u = upstream.col(j).data();
            for (int i = 0; i < layer.in_dim; ++i) {
                const Eigen::Index edge = (Eigen::Index(j) * layer.in_dim + i) * nb;
                const Eigen::Index base = layer.spline_size() + Eigen::Index(j) * layer.in_dim + i;
                const SparseBasis& b = c.basis[std::size_t(i)];
                if (grad) {
                    const double* sl = c.silu.col(i).data();
                    double acc = 0.0;
                    for (Eigen::Index r = 0; r < n; ++r) acc += u[r] * sl[r];
                    (*grad)[layer.offset + base] += acc;
                }
                if (need_down) {
                    const double wb = p[base];
                    const double* sd = c.silu_deriv.col(i).data();
                    double* d = down.col(i).data();
                    for (Eigen::Index r = 0; r < n; ++r) d[r] += u[r] * wb * sd[r];
                }
                if (grad) {
                    double* g = grad->data() + layer.offset + edge;
                    if (w == 4) spline_scatter<4>(b.first, b.value, u, g, w);
                    else spline_scatter<0>(b.first, b.value, u, g, w);
                }
                if (need_down) {
                    double* d = down.col(i).data();
                    if (w == 4) spline_chain<4>(b.first, b.deriv, p + edge, u, d, w);
                    else spline_chain<0>(b.first, b.deriv, p + edge, u, d, w);
                }
            }
        }
        if (!need_down) break;
    }
    return ws.downs.front();
}

Vector KanNetwork::predict(const Matrix& features) const {
    Workspace ws;
    const Matrix& out = forward(normalize(features), ws, false, false);
    return (output_shift + output_scale * out.col(0).array()).matrix();
}

Matrix KanNetwork::input_gradient(const Matrix& features) const {
    Workspace ws;
    forward(normalize(features), ws, true, true);
    const Matrix seed = Matrix::Constant(features.rows(), dims_.back(), output_scale);
    return backward(ws, seed, nullptr, true) * input_scale.asDiagonal();
}

double KanNetwork::loss_and_gradient(const Matrix& features, const Vector& targets, Vector& grad) const {
    if (features.rows() != targets.size()) throw std::invalid_argument("features and targets row counts differ");
    Workspace ws;
    return loss_and_gradient_cached(input_cache(normalize(features), false), targets, grad, ws);
}

double KanNetwork::loss_and_gradient_cached(const LayerCache& first, const Vector& targets, Vector& grad,
                                            Workspace& ws) const {
    const Matrix& out = forward(first.input, ws, true, false, &first);
    const Eigen::Index n = targets.size();
    ws.resid = (output_shift + output_scale * out.col(0).array()).matrix() - targets;
    const double loss = ws.resid.squaredNorm() / double(n);

    grad.setZero(params_.size());
    ws.resid *= 2.0 * output_scale / double(n);
    backward(ws, ws.resid, &grad, false, &first);
    return loss;
}

TrainDiagnostics kan_train(KanNetwork& net, const Matrix& features, const Vector& targets, const TrainConfig& cfg) {
    net.fit_normalization(features, targets);
    if (features.rows() != targets.size()) throw std::invalid_argument("features and targets row counts differ");
    const KanNetwork::LayerCache first = net.input_cache(net.normalize(features), false);
    // Adapts the network plus its fixed first-layer cache to train_mse.
    struct CachedObjective {
        KanNetwork& net;
        const KanNetwork::LayerCache& first;
        mutable KanNetwork::Workspace ws;
        Vector& parameters() { return net.parameters(); }
        double loss_and_gradient(const Matrix&, const Vector& y, Vector& grad) const {
            return net.loss_and_gradient_cached(first, y, grad, ws);
        }
    } objective{net, first, {}};
    TrainDiagnostics diag = train_mse(objective, features, targets, cfg);
    net.trained = true;
    return diag;
}

void KanNetwork::save(std::ostream& out) const {
    out.precision(17);
    out << "kanop-kan 1\n";
    out << "dims " << dims_.size();
    for (int d : dims_) out << ' ' << d;
    const SplineGrid& g = layers_.front().grid;
    out << "\ngrid " << g.n_intervals << ' ' << g.order << ' ' << g.lo << ' ' << g.hi << '\n';
    out << "input_shift";
    for (double v : input_shift) out << ' ' << v;
    out << "\ninput_scale";
    for (double v : input_scale) out << ' ' << v;
    out << "\noutput " << output_shift << ' ' << output_scale << '\n';
    out << "trained " << (trained ? 1 : 0) << '\n';
    out << "params " << params_.size() << '\n';
    for (Eigen::Index q = 0; q < params_.size(); ++q) out << params_[q] << (q + 1 == params_.size() ? '\n' : ' ');
}

KanNetwork KanNetwork::load(std::istream& in) {
    auto expect = [&](const char* word) {
        std::string token;
        if (!(in >> token) || token != word) throw std::runtime_error(std::string("KAN file: expected ") + word);
    };
    int version = 0;
    expect("kanop-kan");
    in >> version;
    if (version != 1) throw std::runtime_error("KAN file: unsupported version");
    expect("dims");
    std::size_t n_dims = 0;
    in >> n_dims;
    KanShape shape;
    shape.dims.resize(n_dims);
    for (int& d : shape.dims) in >> d;
    expect("grid");
    double lo = 0.0, hi = 0.0;
    in >> shape.grid_intervals >> shape.spline_order >> lo >> hi;
    KanNetwork net = kan_init(shape, 0);
    for (KanLayer& layer : net.layers_) layer.grid = make_uniform_grid(lo, hi, shape.grid_intervals, shape.spline_order);
    expect("input_shift");
    for (double& v : net.input_shift) in >> v;
    expect("input_scale");
    for (double& v : net.input_scale) in >> v;
    expect("output");
    in >> net.output_shift >> net.output_scale;
    expect("trained");
    int trained = 0;
    in >> trained;
    net.trained = trained != 0;
    expect("params");
    Eigen::Index count = 0;
    in >> count;
    if (count != net.params_.size()) throw std::runtime_error("KAN file: parameter count mismatch");
    for (Eigen::Index q = 0; q < count; ++q) in >> net.params_[q];
    if (!in) throw std::runtime_error("KAN file: truncated");
    return net;
}

void save_kan(const KanNetwork& net, const std::string& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot open " + file);
    net.save(out);
}

KanNetwork load_kan(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file);
    return KanNetwork::load(in);
}

}  // namespace kanop
