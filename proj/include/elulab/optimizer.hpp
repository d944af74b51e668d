#pragma once

// Mini-batch SGD with optional momentum: per-epoch shuffling from a seeded
// stream, epoch hooks for diagnostics, and metric logging to CSV.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "elulab/data.hpp"
#include "elulab/network.hpp"

namespace elulab {

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.0; // in [0,1); 0 = plain SGD
    std::size_t batch_size = 64;
    std::size_t epochs = 20;
    std::uint64_t shuffle_seed = 0;
    std::size_t log_every = 1; // record metrics every this many epochs

    void validate() const; // throws ConfigError on out-of-range fields
};

struct EpochMetrics {
    std::size_t epoch = 0; // 1-based
    double train_loss = 0.0;
    double eval_loss = 0.0;
    std::optional<double> accuracy;          // classifiers only
    std::optional<double> median_activation; // filled by a diagnostics hook
};

/// Momentum buffers, one velocity per parameter, zero-initialized.
struct SgdState {
    Gradients velocity;
    static SgdState zeros_like(const Network& net);
};

/// Called after each epoch with the post-update network; may fill in extra
/// metric fields before the row is recorded.
using EpochHook = std::function<void(const Network& net, EpochMetrics& metrics)>;

namespace optimizer {

/// One update: v = momentum*v - lr*g; w += v. With momentum=0 this is plain
/// SGD exactly. Non-finite gradients raise DivergenceError naming the layer.
void sgd_step(Network& net, const Gradients& grads, SgdState& state, const TrainConfig& cfg);

/// Full training loop. Reshuffles each epoch with Rng::forked(shuffle_seed,
/// epoch); the final partial batch is kept. Targets come from the loss:
/// cross-entropy uses one-hot labels, mean squared error reconstructs the
/// inputs. Metrics rows are recorded every log_every epochs (always on the
/// last); hooks run after every recorded epoch. DivergenceError is rethrown
/// with epoch/batch coordinates.
std::vector<EpochMetrics> train(Network& net, const Dataset& train_data, const Dataset& eval_data,
                                const TrainConfig& cfg,
                                const std::vector<EpochHook>& hooks = {});

/// Write "epoch,train_loss,eval_loss,accuracy,median_activation" rows;
/// unset optional fields are left empty. Atomic write.
void write_metrics_csv(const std::vector<EpochMetrics>& metrics, const std::string& path);

} // namespace optimizer
} // namespace elulab
