#include "kanop/mlp.hpp"

#include <algorithm>
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

Matrix activate(Activation act, const Matrix& z) {
    if (act == Activation::relu) return z.cwiseMax(0.0);
    return z.array().tanh().matrix();
}

Matrix activate_deriv(Activation act, const Matrix& z) {
    if (act == Activation::relu) return (z.array() > 0.0).cast<double>().matrix();
    return (1.0 - z.array().tanh().square()).matrix();
}

}  // namespace

Eigen::Map<RowMatrix> MlpNetwork::weight(std::size_t layer) {
    return Eigen::Map<RowMatrix>(params_.data() + offsets_.at(layer), dims_[layer + 1], dims_[layer]);
}

Eigen::Map<const RowMatrix> MlpNetwork::weight(std::size_t layer) const {
    return Eigen::Map<const RowMatrix>(params_.data() + offsets_.at(layer), dims_[layer + 1], dims_[layer]);
}

Eigen::Map<Vector> MlpNetwork::bias(std::size_t layer) {
    const Eigen::Index w = Eigen::Index(dims_[layer + 1]) * dims_[layer];
    return Eigen::Map<Vector>(params_.data() + offsets_.at(layer) + w, dims_[layer + 1]);
}

Eigen::Map<const Vector> MlpNetwork::bias(std::size_t layer) const {
    const Eigen::Index w = Eigen::Index(dims_[layer + 1]) * dims_[layer];
    return Eigen::Map<const Vector>(params_.data() + offsets_.at(layer) + w, dims_[layer + 1]);
}

MlpNetwork mlp_init(const std::vector<int>& dims, Activation activation, std::uint64_t seed) {
    if (dims.size() < 2) throw std::invalid_argument("MLP needs at least input and output dims");
    for (int d : dims)
        if (d < 1) throw std::invalid_argument("MLP layer widths must be positive");

    MlpNetwork net;
    net.dims_ = dims;
    net.activation_ = activation;
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        net.offsets_.push_back(offset);
        offset += Eigen::Index(dims[l + 1]) * dims[l] + dims[l + 1];
    }
    net.params_ = Vector::Zero(offset);

    std::mt19937_64 engine(seed);
    std::normal_distribution<double> normal;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const double fan_in = dims[l];
        const double fan_out = dims[l + 1];
        const double std_dev = activation == Activation::relu ? std::sqrt(2.0 / fan_in)
                                                              : std::sqrt(2.0 / (fan_in + fan_out));
        auto w = net.weight(l);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = std_dev * normal(engine);
    }
    net.input_mean = Vector::Zero(dims.front());
    net.input_std = Vector::Ones(dims.front());
    net.instance_id_ = g_next_instance.fetch_add(1);
    return net;
}

void MlpNetwork::fit_normalization(const Matrix& features, const Vector& targets) {
    const Eigen::Index n_in = features.cols();
    input_mean = features.colwise().mean().transpose();
    input_std.resize(n_in);
    for (Eigen::Index i = 0; i < n_in; ++i) {
        const double var = (features.col(i).array() - input_mean[i]).square().mean();
        input_std[i] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    const double mean = targets.mean();
    const double var = (targets.array() - mean).square().mean();
    output_shift = mean;
    output_scale = var > 1e-24 * std::max(1.0, mean * mean) ? std::sqrt(var) : 1.0;
}

Matrix MlpNetwork::normalize(const Matrix& features) const {
    if (features.cols() != dims_.front()) throw std::invalid_argument("feature width does not match MLP input dim");
    return (features.rowwise() - input_mean.transpose()) * input_std.cwiseInverse().asDiagonal();
}

Matrix MlpNetwork::forward(const Matrix& z, std::vector<Matrix>* activations, std::vector<Matrix>* pre) const {
    Matrix a = z;
    const std::size_t n_layers = dims_.size() - 1;
    for (std::size_t l = 0; l < n_layers; ++l) {
        Matrix zl = a * weight(l).transpose();
        zl.rowwise() += bias(l).transpose();
        if (activations) activations->push_back(std::move(a));
        if (l + 1 == n_layers) return zl;
        a = activate(activation_, zl);
        if (pre) pre->push_back(std::move(zl));
    }
    return a;
}

Matrix MlpNetwork::backward(const std::vector<Matrix>& activations, const std::vector<Matrix>& pre,
                            Matrix upstream, Vector* grad) const {
    for (std::size_t l = dims_.size() - 1; l-- > 0;) {
        if (grad) {
            Eigen::Map<RowMatrix>(grad->data() + offsets_[l], dims_[l + 1], dims_[l]).noalias() +=
                upstream.transpose() * activations[l];
            const Eigen::Index w = Eigen::Index(dims_[l + 1]) * dims_[l];
            Eigen::Map<Vector>(grad->data() + offsets_[l] + w, dims_[l + 1]) += upstream.colwise().sum().transpose();
        }
        Matrix down = upstream * weight(l);
        if (l > 0) down = down.cwiseProduct(activate_deriv(activation_, pre[l - 1]));
        upstream = std::move(down);
    }
    return upstream;
}

Vector MlpNetwork::predict(const Matrix& features) const {
    const Matrix out = forward(normalize(features), nullptr, nullptr);
    return (output_shift + output_scale * out.col(0).array()).matrix();
}

Matrix MlpNetwork::input_gradient(const Matrix& features) const {
    std::vector<Matrix> acts, pre;
    forward(normalize(features), &acts, &pre);
    Matrix g = backward(acts, pre, Matrix::Constant(features.rows(), dims_.back(), output_scale), nullptr);
    return g * input_std.cwiseInverse().asDiagonal();
}

double MlpNetwork::loss_and_gradient(const Matrix& features, const Vector& targets, Vector& grad) const {
    if (features.rows() != targets.size()) throw std::invalid_argument("features and targets row counts differ");
    // Full-batch gradient, accumulated over row blocks small enough to stay
    // in cache. Buffers are reused across blocks.
    constexpr Eigen::Index block = 256;
    const Eigen::Index rows = features.rows();
    const double n = double(rows);
    const std::size_t n_layers = dims_.size() - 1;
    const bool relu = activation_ == Activation::relu;
    grad.setZero(params_.size());
    double sse = 0.0;
    std::vector<Matrix> act(n_layers), pre(n_layers);
    Matrix up, down;
    for (Eigen::Index r0 = 0; r0 < rows; r0 += block) {
        const Eigen::Index m = std::min(block, rows - r0);
        act[0] = (features.middleRows(r0, m).rowwise() - input_mean.transpose()) * input_std.cwiseInverse().asDiagonal();
        for (std::size_t l = 0; l < n_layers; ++l) {
            pre[l].resize(m, dims_[l + 1]);
            pre[l].noalias() = act[l] * weight(l).transpose();
            pre[l].rowwise() += bias(l).transpose();
            if (l + 1 == n_layers) break;
            act[l + 1].resize(m, dims_[l + 1]);
            if (relu)
                act[l + 1] = pre[l].cwiseMax(0.0);
            else
                act[l + 1] = pre[l].array().tanh().matrix();
        }
        up.resize(m, 1);
        up.col(0) = (output_shift + output_scale * pre[n_layers - 1].col(0).array()).matrix() - targets.segment(r0, m);
        sse += up.squaredNorm();
        up *= 2.0 * output_scale / n;
        for (std::size_t l = n_layers; l-- > 0;) {
            Eigen::Map<RowMatrix>(grad.data() + offsets_[l], dims_[l + 1], dims_[l]).noalias() +=
                up.transpose() * act[l];
            const Eigen::Index w = Eigen::Index(dims_[l + 1]) * dims_[l];
            Eigen::Map<Vector>(grad.data() + offsets_[l] + w, dims_[l + 1]) += up.colwise().sum().transpose();
            if (l == 0) break;
            down.resize(m, dims_[l]);
            down.noalias() = up * weight(l);
            if (relu)
                down.array() *= (pre[l - 1].array() > 0.0).cast<double>();
            else
                down.array() *= 1.0 - act[l].array().square();
            std::swap(up, down);
        }
    }
    return sse / n;
}

TrainDiagnostics mlp_train(MlpNetwork& net, const Matrix& features, const Vector& targets, const TrainConfig& cfg) {
    net.fit_normalization(features, targets);
    TrainDiagnostics diag = train_mse(net, features, targets, cfg);
    net.trained = true;
    return diag;
}

void MlpNetwork::save(std::ostream& out) const {
    out.precision(17);
    out << "kanop-mlp 1\n";
    out << "dims " << dims_.size();
    for (int d : dims_) out << ' ' << d;
    out << "\nactivation " << to_string(activation_) << '\n';
    out << "input_mean";
    for (double v : input_mean) out << ' ' << v;
    out << "\ninput_std";
    for (double v : input_std) out << ' ' << v;
    out << "\noutput " << output_shift << ' ' << output_scale << '\n';
    out << "trained " << (trained ? 1 : 0) << '\n';
    out << "params " << params_.size() << '\n';
    for (Eigen::Index q = 0; q < params_.size(); ++q) out << params_[q] << (q + 1 == params_.size() ? '\n' : ' ');
}

MlpNetwork MlpNetwork::load(std::istream& in) {
    auto expect = [&](const char* word) {
        std::string token;
        if (!(in >> token) || token != word) throw std::runtime_error(std::string("MLP file: expected ") + word);
    };
    int version = 0;
    expect("kanop-mlp");
    in >> version;
    if (version != 1) throw std::runtime_error("MLP file: unsupported version");
    expect("dims");
    std::size_t n_dims = 0;
    in >> n_dims;
    std::vector<int> dims(n_dims);
    for (int& d : dims) in >> d;
    expect("activation");
    std::string act;
    in >> act;
    MlpNetwork net = mlp_init(dims, parse_activation(act), 0);
    expect("input_mean");
    for (double& v : net.input_mean) in >> v;
    expect("input_std");
    for (double& v : net.input_std) in >> v;
    expect("output");
    in >> net.output_shift >> net.output_scale;
    expect("trained");
    int trained = 0;
    in >> trained;
    net.trained = trained != 0;
    expect("params");
    Eigen::Index count = 0;
    in >> count;
    if (count != net.params_.size()) throw std::runtime_error("MLP file: parameter count mismatch");
    for (Eigen::Index q = 0; q < count; ++q) in >> net.params_[q];
    if (!in) throw std::runtime_error("MLP file: truncated");
    return net;
}

void save_mlp(const MlpNetwork& net, const std::string& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot open " + file);
    net.save(out);
}

MlpNetwork load_mlp(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file);
    return MlpNetwork::load(in);
}

std::string_view to_string(Activation activation) { return activation == Activation::relu ? "relu" : "tanh"; }

Activation parse_activation(std::string_view text) {
    if (text == "relu") return Activation::relu;
    if (text == "tanh") return Activation::tanh;
    throw std::invalid_argument("activation must be relu or tanh");
}

}  // namespace kanop
