#include "elulab/optimizer.hpp"

#include <cmath>
#include <numeric>

#include "elulab/errors.hpp"
#include "elulab/io.hpp"
#include "elulab/kernels.hpp"
#include "elulab/rng.hpp"

namespace elulab {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0))
        throw ConfigError("learning rate must be > 0, got " + io::format_double(learning_rate));
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw ConfigError("momentum must be in [0,1), got " + io::format_double(momentum));
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (log_every < 1) throw ConfigError("log_every must be >= 1");
}

SgdState SgdState::zeros_like(const Network& net) {
    SgdState s;
    for (const Layer& l : net.layers)
        s.velocity.layers.push_back({Matrix(l.fan_out(), l.fan_in()), Vector(l.fan_out())});
    return s;
}

namespace optimizer {

namespace {

bool all_finite(const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

// Gather shuffled rows [from, to) of the training set into a batch, along
// with the matching targets (one-hot labels for CE, the inputs for MSE).
void fill_batch(const Dataset& d, const Matrix& one_hot_targets, Loss loss,
                const std::vector<std::size_t>& order, std::size_t from, std::size_t to,
                Matrix& batch, Matrix& targets) {
    const std::size_t n = to - from;
    batch = Matrix(n, d.dim());
    const Matrix& target_src = loss == Loss::softmax_cross_entropy ? one_hot_targets : d.inputs;
    targets = Matrix(n, target_src.cols);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t src = order[from + i];
        std::copy_n(d.inputs.row(src), d.dim(), batch.row(i));
        std::copy_n(target_src.row(src), target_src.cols, targets.row(i));
    }
}

double classification_accuracy(const Matrix& output, const std::vector<std::uint32_t>& labels) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < output.rows; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < output.cols; ++j)
            if (output(i, j) > output(i, best)) best = j;
        hits += best == labels[i];
    }
    return double(hits) / double(output.rows);
}

} // namespace

void sgd_step(Network& net, const Gradients& grads, SgdState& state, const TrainConfig& cfg) {
    if (grads.layers.size() != net.layers.size())
        throw ShapeError("sgd_step: " + std::to_string(grads.layers.size()) + " gradient layers for " +
                         std::to_string(net.layers.size()) + " network layers");
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Layer& layer = net.layers[l];
        const LayerGrads& g = grads.layers[l];
        require_same_shape(layer.weights, g.d_weights, "sgd_step");
        if (!all_finite(g.d_weights.data.data(), g.d_weights.data.size()) ||
            !all_finite(g.d_bias.data.data(), g.d_bias.len()))
            throw DivergenceError("non-finite gradient", l);
        LayerGrads& v = state.velocity.layers[l];
        kernels::sgd_update(layer.weights.data.size(), cfg.learning_rate, cfg.momentum,
                            g.d_weights.data.data(), v.d_weights.data.data(),
                            layer.weights.data.data());
        kernels::sgd_update(layer.bias.len(), cfg.learning_rate, cfg.momentum,
                            g.d_bias.data.data(), v.d_bias.data.data(), layer.bias.data.data());
    }
}

std::vector<EpochMetrics> train(Network& net, const Dataset& train_data, const Dataset& eval_data,
                                const TrainConfig& cfg, const std::vector<EpochHook>& hooks) {
    cfg.validate();
    if (train_data.size() == 0) throw ConfigError("train: training set is empty");
    if (train_data.dim() != net.input_dim())
        throw ShapeError("train: data dim " + std::to_string(train_data.dim()) +
                         " does not match network input " + std::to_string(net.input_dim()));
    if (eval_data.size() == 0) throw ConfigError("train: eval set is empty");
    const bool classifying = net.loss == Loss::softmax_cross_entropy;
    if (classifying && !(train_data.has_labels() && eval_data.has_labels()))
        throw ConfigError("train: cross-entropy training needs labeled data");

    Matrix train_one_hot, eval_targets;
    if (classifying) {
        train_one_hot = one_hot(train_data.labels, net.output_dim());
        eval_targets = one_hot(eval_data.labels, net.output_dim());
    } else {
        eval_targets = eval_data.inputs;
    }

    SgdState state = SgdState::zeros_like(net);
    std::vector<std::size_t> order(train_data.size());
    std::vector<EpochMetrics> history;
    Matrix batch, targets;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        // each epoch's order is a pure function of (shuffle_seed, epoch)
        std::iota(order.begin(), order.end(), 0);
        Rng rng = Rng::forked(cfg.shuffle_seed, epoch);
        rng.shuffle(order);

        double loss_sum = 0.0; // example-weighted, so the epoch mean is exact
        for (std::size_t from = 0, batch_index = 0; from < order.size();
             from += cfg.batch_size, ++batch_index) {
            const std::size_t to = std::min(from + cfg.batch_size, order.size());
            fill_batch(train_data, train_one_hot, net.loss, order, from, to, batch, targets);
            ForwardTrace trace = forward(net, batch);
            loss_sum += loss_value(net, trace.output(), targets) * double(to - from);
            Gradients grads = backprop_loss(net, trace, targets);
            try {
                sgd_step(net, grads, state, cfg);
            } catch (const DivergenceError& e) {
                throw DivergenceError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                                          ", batch " + std::to_string(batch_index) + ")",
                                      e.layer);
            }
        }

        if (epoch % cfg.log_every != 0 && epoch != cfg.epochs) continue;

        EpochMetrics m;
        m.epoch = epoch;
        m.train_loss = loss_sum / double(train_data.size());
        ForwardTrace eval_trace = forward(net, eval_data.inputs);
        m.eval_loss = loss_value(net, eval_trace.output(), eval_targets);
        if (classifying && eval_data.has_labels())
            m.accuracy = classification_accuracy(eval_trace.output(), eval_data.labels);
        for (const EpochHook& hook : hooks) hook(net, m);
        history.push_back(std::move(m));
    }
    return history;
}

void write_metrics_csv(const std::vector<EpochMetrics>& metrics, const std::string& path) {
    std::string out = "epoch,train_loss,eval_loss,accuracy,median_activation\n";
    for (const EpochMetrics& m : metrics) {
        out += std::to_string(m.epoch);
        out += ',' + io::format_double(m.train_loss);
        out += ',' + io::format_double(m.eval_loss);
        out += ',';
        if (m.accuracy) out += io::format_double(*m.accuracy);
        out += ',';
        if (m.median_activation) out += io::format_double(*m.median_activation);
        out += '\n';
    }
    io::write_file_atomic(path, out);
}

} // namespace optimizer
} // namespace elulab
