#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "kanop/linalg.hpp"

namespace kanop {

/// Raised when training produces a non-finite loss.
class NumericFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    double learning_rate = 1e-2;
    int epochs = 300;
    std::uint64_t seed = 7;
    int early_stop_patience = 50;

    void validate() const {
        if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
        if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
        if (early_stop_patience < 1) throw std::invalid_argument("early_stop_patience must be at least 1");
    }
};

struct TrainDiagnostics {
    std::vector<double> loss_curve;
    double initial_mse = 0.0;
    double final_mse = 0.0;
    int epochs_run = 0;
    bool early_stopped = false;
};

/// Adam over a flat parameter vector.
class Adam {
public:
    explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(Vector& params, const Vector& grad) {
        if (m_.size() != params.size()) {
            m_ = Vector::Zero(params.size());
            v_ = Vector::Zero(params.size());
            t_ = 0;
        }
        ++t_;
        m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
        v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(beta1_, t_);
        const double c2 = 1.0 - std::pow(beta2_, t_);
        params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
    }

private:
    double lr_, beta1_, beta2_, eps_;
    Vector m_, v_;
    int t_ = 0;
};

/// Full-batch Adam on mean squared error for any network exposing
/// `parameters()` and `loss_and_gradient(features, targets, grad)`.
/// Keeps the best parameters seen; stops after `early_stop_patience`
/// epochs without improvement.
template <typename Network>
TrainDiagnostics train_mse(Network& net, const Matrix& features, const Vector& targets, const TrainConfig& cfg) {
    cfg.validate();
    if (features.rows() != targets.size()) throw std::invalid_argument("features and targets row counts differ");

    TrainDiagnostics diag;
    Adam adam(cfg.learning_rate);
    Vector grad(net.parameters().size());
    Vector best = net.parameters();
    double best_loss = std::numeric_limits<double>::infinity();
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double loss = net.loss_and_gradient(features, targets, grad);
        if (!std::isfinite(loss) || !grad.allFinite())
            throw NumericFailure("non-finite loss at epoch " + std::to_string(epoch) +
                                 " (learning rate too high?)");
        if (epoch == 0) diag.initial_mse = loss;
        diag.loss_curve.push_back(loss);
        if (loss < best_loss) {
            if (loss < best_loss * (1.0 - 1e-6)) since_best = 0;
            best_loss = loss;
            best = net.parameters();
        }
        if (++since_best > cfg.early_stop_patience) {
            diag.early_stopped = true;
            break;
        }
        adam.step(net.parameters(), grad);
    }
    // The last step is unevaluated; compare it against the best seen.
    const double last = net.loss_and_gradient(features, targets, grad);
    if (std::isfinite(last) && last < best_loss) {
        best_loss = last;
        best = net.parameters();
    }
    net.parameters() = best;
    diag.epochs_run = static_cast<int>(diag.loss_curve.size());
    diag.final_mse = best_loss;
    return diag;
}

}  // namespace kanop
