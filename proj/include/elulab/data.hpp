#pragma once

// Dataset ingestion: MNIST-format IDX files, deterministic splitting, and
// synthetic fixtures (two Gaussians for toy classification; procedural
// 28x28 "digits" shaped like the MNIST task, for self-contained runs).

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "elulab/types.hpp"

namespace elulab {

struct Dataset {
    Matrix inputs;                     // n x d, entries in [0,1] for image data
    std::vector<std::uint32_t> labels; // empty for autoencoding tasks
    std::string name;

    std::size_t size() const { return inputs.rows; }
    std::size_t dim() const { return inputs.cols; }
    bool has_labels() const { return !labels.empty(); }
};

namespace data {

/// Load an IDX image/label pair (big-endian, magic 2051/2049). Pixels are
/// scaled to [0,1] by /255 and flattened row-major to d = rows*cols.
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

/// Fixture writer: the inverse of load_mnist_idx. Inputs are quantized back
/// to the /255 grid, so load(write(d)) == d holds bit-exactly for datasets
/// that came from u8 pixels.
void write_idx(const Dataset& d, std::size_t img_rows, std::size_t img_cols,
               const std::string& images_path, const std::string& labels_path);

/// Seeded shuffle, then split off a validation fraction. Deterministic,
/// disjoint, exhaustive.
std::pair<Dataset, Dataset> split(const Dataset& d, double validation_fraction,
                                  std::uint64_t seed);

/// Two Gaussian blobs at +/- separation/2 along the first coordinate, unit
/// variance, balanced labels. n must be even.
Dataset synthetic_two_gaussians(std::size_t n, std::size_t dims, double separation,
                                std::uint64_t seed);

/// Procedural 28x28 ten-class image set used when no real MNIST files are
/// available: each class is a fixed arrangement of Gaussian blobs, each
/// sample gets an integer translation, per-blob jitter, amplitude noise, and
/// is quantized to the /255 grid. Deterministic for a fixed seed.
Dataset synthetic_digits(std::size_t n, std::uint64_t seed);

} // namespace data
} // namespace elulab
