#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "kanop/linalg.hpp"
#include "kanop/train.hpp"

namespace kanop {

enum class Activation { relu, tanh };

/// Fully connected regressor with a linear output layer. Parameters are
/// one flat vector: per layer the row-major weight matrix (out x in)
/// followed by the bias.
class MlpNetwork {
public:
    MlpNetwork() = default;

    const std::vector<int>& dims() const { return dims_; }
    Activation activation() const { return activation_; }
    Eigen::Index parameter_count() const { return params_.size(); }
    Vector& parameters() { return params_; }
    const Vector& parameters() const { return params_; }

    Eigen::Map<RowMatrix> weight(std::size_t layer);
    Eigen::Map<const RowMatrix> weight(std::size_t layer) const;
    Eigen::Map<Vector> bias(std::size_t layer);
    Eigen::Map<const Vector> bias(std::size_t layer) const;

    /// z = (x - input_mean) / input_std feeds the first layer;
    /// prediction = output_shift + output_scale * network(z).
    Vector input_mean, input_std;
    double output_shift = 0.0;
    double output_scale = 1.0;
    bool trained = false;

    std::uint64_t instance_id() const { return instance_id_; }

    /// Standardizes features and targets from training data.
    void fit_normalization(const Matrix& features, const Vector& targets);

    Vector predict(const Matrix& features) const;
    /// Exact backward pass to the raw inputs; relu'(0) = 0.
    Matrix input_gradient(const Matrix& features) const;
    double loss_and_gradient(const Matrix& features, const Vector& targets, Vector& grad) const;

    void save(std::ostream& out) const;
    static MlpNetwork load(std::istream& in);

    friend MlpNetwork mlp_init(const std::vector<int>& dims, Activation activation, std::uint64_t seed);

private:
    Matrix normalize(const Matrix& features) const;
    // Returns the pre-activations of every layer; activations[l] is the input to layer l.
    Matrix forward(const Matrix& z, std::vector<Matrix>* activations, std::vector<Matrix>* pre) const;
    Matrix backward(const std::vector<Matrix>& activations, const std::vector<Matrix>& pre, Matrix upstream,
                    Vector* grad) const;

    std::vector<int> dims_;
    std::vector<Eigen::Index> offsets_;
    Activation activation_ = Activation::relu;
    Vector params_;
    std::uint64_t instance_id_ = 0;
};

/// He-normal weights for relu, Xavier-normal for tanh, zero biases.
MlpNetwork mlp_init(const std::vector<int>& dims, Activation activation, std::uint64_t seed);

TrainDiagnostics mlp_train(MlpNetwork& net, const Matrix& features, const Vector& targets, const TrainConfig& cfg);

inline Vector mlp_predict(const MlpNetwork& net, const Matrix& features) { return net.predict(features); }
inline Matrix mlp_input_gradient(const MlpNetwork& net, const Matrix& features) {
    return net.input_gradient(features);
}

void save_mlp(const MlpNetwork& net, const std::string& file);
MlpNetwork load_mlp(const std::string& file);

std::string_view to_string(Activation activation);
Activation parse_activation(std::string_view text);

}  // namespace kanop
