#pragma once

// Fully connected MLP: deterministic He initialization, forward pass that
// retains per-layer net inputs and activations, and two backward passes —
// the training-loss gradient, and the per-example derivative of the log
// output probability w.r.t. one unit's net input (the delta the Fisher
// estimator consumes).

#include <cstdint>
#include <string>
#include <vector>

#include "elulab/activations.hpp"
#include "elulab/types.hpp"

namespace elulab {

/// Identifies one unit. `layer` is 1-based over the dense layers (layer 1 is
/// the first dense layer; its incoming activations are the network inputs).
/// Layer 0 — the input layer — has no incoming weights and is rejected.
struct LayerUnitRef {
    std::size_t layer = 0;
    std::size_t unit = 0;
};

enum class Loss { softmax_cross_entropy, mean_squared_error };

struct Layer {
    enum class Mode { activation, linear, softmax };

    Matrix weights; // fan_out x fan_in
    Vector bias;    // fan_out
    Mode mode = Mode::activation;
    ActivationKind kind; // valid when mode == activation

    std::size_t fan_in() const { return weights.cols; }
    std::size_t fan_out() const { return weights.rows; }
};

struct Network {
    std::vector<Layer> layers;
    Loss loss = Loss::softmax_cross_entropy;

    std::size_t input_dim() const { return layers.front().fan_in(); }
    std::size_t output_dim() const { return layers.back().fan_out(); }
    std::size_t layer_count() const { return layers.size(); }
};

/// Everything the forward pass saw, layer by layer (batch x units each).
/// The last activation matrix is the network output. The input batch is kept
/// too: it is layer 1's incoming activation matrix, which the backward pass
/// and the Fisher estimator both need.
struct ForwardTrace {
    Matrix inputs;
    std::vector<Matrix> net_inputs;
    std::vector<Matrix> activations;

    const Matrix& output() const { return activations.back(); }

    /// Incoming activations of dense layer l (0-based): the inputs for l=0,
    /// otherwise the previous layer's activations.
    const Matrix& incoming(std::size_t l) const { return l == 0 ? inputs : activations[l - 1]; }
};

struct LayerGrads {
    Matrix d_weights;
    Vector d_bias;
};

struct Gradients {
    std::vector<LayerGrads> layers;
};

/// He-initialized network: weights ~ Normal(0, sqrt(2/fan_in)), biases zero,
/// drawn in layer order from a single seeded generator — the same seed gives
/// a bit-identical network. `activations` covers the hidden layers only; the
/// output layer is linear for MSE and softmax for cross-entropy.
Network init_he(const std::vector<std::size_t>& layer_sizes,
                const std::vector<ActivationKind>& activations, Loss loss, std::uint64_t seed);

ForwardTrace forward(const Network& net, const Matrix& inputs);

/// Mean loss over the batch: cross-entropy -1/N sum_i ln p(y_i), or squared
/// error 1/N sum_i 0.5 * |y_i - t_i|^2.
double loss_value(const Network& net, const Matrix& output, const Matrix& targets);

/// Exact gradient of loss_value w.r.t. every weight and bias.
Gradients backprop_loss(const Network& net, const ForwardTrace& trace, const Matrix& targets);

/// Per-example derivative of ln p(y | x; w) w.r.t. the net input of `unit`
/// (note the sign: log-probability, not loss). Requires a softmax
/// cross-entropy network.
Vector backprop_logprob_delta(const Network& net, const ForwardTrace& trace,
                              const std::vector<std::uint32_t>& labels, LayerUnitRef unit);

/// One-hot encode labels into an n x num_classes matrix.
Matrix one_hot(const std::vector<std::uint32_t>& labels, std::size_t num_classes);

/// Flat binary serialization (magic "ELUNET01"): header with layer dims and
/// per-layer activation tags, then all weights row-major f64 little-endian,
/// then all biases.
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

} // namespace elulab
