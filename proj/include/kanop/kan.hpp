#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "kanop/bspline.hpp"
#include "kanop/linalg.hpp"
#include "kanop/train.hpp"

namespace kanop {

/// One KAN layer. Every edge (j <- i) carries
///   phi_ji(x) = base_weight_ji * silu(x) + sum_b spline_coef_jib * B_b(x)
/// and node j sums its incoming edges. Parameters live in the owning
/// network's flat vector starting at `offset`, laid out as the spline
/// tensor [out][in][basis] followed by the base weights [out][in].
struct KanLayer {
    int in_dim = 0;
    int out_dim = 0;
    SplineGrid grid;
    Eigen::Index offset = 0;

    Eigen::Index spline_size() const { return Eigen::Index(out_dim) * in_dim * grid.n_basis(); }
    Eigen::Index base_size() const { return Eigen::Index(out_dim) * in_dim; }
    Eigen::Index parameter_count() const { return spline_size() + base_size(); }
};

struct KanShape {
    std::vector<int> dims;  // e.g. {1, 3, 1}
    int grid_intervals = 5;
    int spline_order = 3;
};

class KanNetwork {
public:
    KanNetwork() = default;

    const std::vector<int>& dims() const { return dims_; }
    const std::vector<KanLayer>& layers() const { return layers_; }
    Eigen::Index parameter_count() const { return params_.size(); }
    Vector& parameters() { return params_; }
    const Vector& parameters() const { return params_; }

    /// View of spline coefficients for edge (out j <- in i) of a layer.
    Eigen::Map<Vector> spline_coef(std::size_t layer, int j, int i);
    Eigen::Map<const Vector> spline_coef(std::size_t layer, int j, int i) const;
    double& base_weight(std::size_t layer, int j, int i);
    double base_weight(std::size_t layer, int j, int i) const;

    /// Affine maps: z = (x - input_shift) * input_scale feeds the first
    /// layer; prediction = output_shift + output_scale * network(z).
    Vector input_shift, input_scale;
    double output_shift = 0.0;
    double output_scale = 1.0;
    bool trained = false;

    /// Unique per constructed network; LSMC uses it to check fresh inits.
    std::uint64_t instance_id() const { return instance_id_; }

    /// Maps each feature's [min, max] onto the grid domain and standardizes
    /// the targets.
    void fit_normalization(const Matrix& features, const Vector& targets);

    Vector predict(const Matrix& features) const;

    /// d prediction / d raw feature, one column per input.
    Matrix input_gradient(const Matrix& features) const;

    /// Mean squared error of predict() against targets; fills the gradient
    /// with respect to parameters().
    double loss_and_gradient(const Matrix& features, const Vector& targets, Vector& grad) const;

    void save(std::ostream& out) const;
    static KanNetwork load(std::istream& in);

    friend KanNetwork kan_init(const KanShape& shape, std::uint64_t seed);
    friend TrainDiagnostics kan_train(KanNetwork& net, const Matrix& features, const Vector& targets,
                                      const TrainConfig& cfg);

private:
    // Per input column: the order + 1 nonzero basis values (and
    // derivatives) of every row, starting at basis index `first`.
    struct SparseBasis {
        Eigen::VectorXi first;
        RowMatrix value, deriv;
    };
    struct LayerCache {
        std::vector<SparseBasis> basis;
        Matrix input, silu, silu_deriv;  // n x in_dim
    };

    // Buffers for one pass, kept between training epochs so the
    // same-sized matrices are not reallocated.
    struct Workspace {
        std::vector<LayerCache> caches;
        std::vector<Matrix> outs;   // outs[l]: output of layer l
        std::vector<Matrix> downs;  // downs[l]: d loss / d input of layer l
        Vector resid;
    };

    Matrix normalize(const Matrix& features) const;
    // First-layer cache for fixed inputs; it does not depend on parameters,
    // so training computes it once.
    LayerCache input_cache(const Matrix& z, bool with_derivatives) const;
    // Returns the network output (a reference into ws). `keep` retains the
    // per-layer caches for backward; `first`, when given, replaces the
    // layer-0 evaluation.
    const Matrix& forward(const Matrix& z, Workspace& ws, bool keep, bool input_derivatives,
                          const LayerCache* first = nullptr) const;
    // Propagates d loss / d network output back to d loss / d network input,
    // accumulating parameter gradients when `grad` is non-null. Skips the
    // input term when `want_input` is false and then returns ws.downs[0]
    // unset.
    const Matrix& backward(Workspace& ws, const Matrix& upstream, Vector* grad, bool want_input,
                           const LayerCache* first = nullptr) const;
    static void evaluate_layer(const SplineGrid& grid, const Matrix& a, bool derivs, bool silu_derivs,
                               std::vector<SparseBasis>& basis, Matrix& silu, Matrix& silu_deriv);
    double loss_and_gradient_cached(const LayerCache& first, const Vector& targets, Vector& grad,
                                    Workspace& ws) const;

    std::vector<int> dims_;
    std::vector<KanLayer> layers_;
    Vector params_;
    std::uint64_t instance_id_ = 0;
};

/// Fresh network with near-zero spline coefficients (std 0.1 / sqrt(G + k))
/// and fan-in scaled base weights; every layer uses a [-1, 1] grid.
/// Identity input/output affine until fit_normalization is called.
KanNetwork kan_init(const KanShape& shape, std::uint64_t seed);

/// Hidden width from the 2n + 1 rule.
inline int kan_hidden_width(int n_inputs) { return 2 * n_inputs + 1; }

/// Fits normalization on the data, then runs full-batch Adam on MSE.
TrainDiagnostics kan_train(KanNetwork& net, const Matrix& features, const Vector& targets, const TrainConfig& cfg);

inline Vector kan_forward(const KanNetwork& net, const Matrix& features) { return net.predict(features); }
inline Matrix kan_input_gradient(const KanNetwork& net, const Matrix& features) {
    return net.input_gradient(features);
}

void save_kan(const KanNetwork& net, const std::string& file);
KanNetwork load_kan(const std::string& file);

}  // namespace kanop
