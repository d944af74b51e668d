#pragma once

// Activation statistics: per-unit median activations over a fixed probe set
// (tracked across epochs), variance of those medians, and autoencoder
// reconstruction error. CSV emitters for the recorded traces.

#include <cstdint>
#include <string>
#include <vector>

#include "elulab/data.hpp"
#include "elulab/network.hpp"

namespace elulab {

/// Per-epoch record of every hidden unit's median (and mean) activation over
/// a fixed probe set. Units are concatenated across hidden layers in layer
/// order; layer_offsets[h] .. layer_offsets[h+1] are the units of hidden
/// layer h+1 (1-based, input = layer 0), so layer_offsets has one more entry
/// than there are hidden layers.
struct ActivationTrace {
    std::vector<std::size_t> epochs;
    Matrix per_unit_medians; // epochs x total hidden units
    Matrix per_unit_means;   // same shape; the "average activation" reading
    std::vector<std::size_t> layer_offsets;
};

struct LayerVariances {
    std::size_t layer = 0;                  // 1-based hidden layer index
    std::vector<double> variance_of_medians; // across epochs, n-1 denominator
    // Variance of the epoch-to-epoch changes of the median, the other
    // reading of "variance of these changes". 0 when fewer than 3 epochs.
    std::vector<double> variance_of_first_differences;
};

struct MedianVarianceSummary {
    std::vector<LayerVariances> per_layer;
};

namespace diagnostics {

/// One median activation per hidden unit over the probe set; even example
/// counts take the mean of the two middle values. Probe must be non-empty.
Vector unit_medians(const Network& net, const Dataset& probe);

/// The trace skeleton for a network: empty epoch rows, offsets filled in.
ActivationTrace make_trace(const Network& net);

/// Forward the probe once and append this epoch's median and mean rows.
void append_epoch(ActivationTrace& trace, std::size_t epoch, const Network& net,
                  const Dataset& probe);

/// Per epoch, the median across units of the per-unit medians (the curve a
/// median-activation plot shows).
std::vector<double> trace_summary(const ActivationTrace& trace);

/// Per unit, the sample variance of its median across epochs, grouped by
/// layer. Requires at least two recorded epochs.
MedianVarianceSummary median_variance(const ActivationTrace& trace);

/// Mean squared reconstruction error, averaged over examples and dimensions.
/// The network's output dimension must equal the data dimension.
double reconstruction_error(const Network& net, const Dataset& data);

/// Trace CSV: "epoch,u1_0,u1_1,...,u2_0,..." — one median column per hidden
/// unit, layer 1-based, unit index 0-based. Atomic write.
void write_trace_csv(const ActivationTrace& trace, const std::string& path);

/// Summary CSV: "epoch,median_of_medians,mean_of_means". Atomic write.
void write_summary_csv(const ActivationTrace& trace, const std::string& path);

} // namespace diagnostics
} // namespace elulab
