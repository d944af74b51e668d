#include "elulab/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "elulab/errors.hpp"
#include "elulab/io.hpp"
#include "elulab/rng.hpp"

namespace elulab::data {

namespace {

constexpr std::uint32_t kImageMagic = 2051;
constexpr std::uint32_t kLabelMagic = 2049;

struct BeReader {
    const std::string& buf;
    const std::string& path;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) const {
        if (pos + n > buf.size())
            throw LengthError(path + ": file ends inside " + what + " (have " +
                              std::to_string(buf.size()) + " bytes, need " +
                              std::to_string(pos + n) + ")");
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        const auto* b = reinterpret_cast<const unsigned char*>(buf.data() + pos);
        pos += 4;
        return std::uint32_t(b[0]) << 24 | std::uint32_t(b[1]) << 16 | std::uint32_t(b[2]) << 8 |
               std::uint32_t(b[3]);
    }
    const unsigned char* bytes(std::size_t n, const char* what) {
        need(n, what);
        const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos);
        pos += n;
        return p;
    }
};

void put_u32_be(std::string& out, std::uint32_t v) {
    out.push_back(char(v >> 24 & 0xff));
    out.push_back(char(v >> 16 & 0xff));
    out.push_back(char(v >> 8 & 0xff));
    out.push_back(char(v & 0xff));
}

} // namespace

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    const std::string ibuf = io::read_file(images_path);
    BeReader ir{ibuf, images_path};
    const std::uint32_t imagic = ir.u32("image magic");
    if (imagic != kImageMagic)
        throw FormatError(images_path + ": image magic " + std::to_string(imagic) +
                          " (expected " + std::to_string(kImageMagic) + ")");
    const std::size_t n = ir.u32("image count");
    const std::size_t rows = ir.u32("image rows");
    const std::size_t cols = ir.u32("image cols");
    const std::size_t d = rows * cols;
    const unsigned char* pixels = ir.bytes(n * d, "pixel data");

    const std::string lbuf = io::read_file(labels_path);
    BeReader lr{lbuf, labels_path};
    const std::uint32_t lmagic = lr.u32("label magic");
    if (lmagic != kLabelMagic)
        throw FormatError(labels_path + ": label magic " + std::to_string(lmagic) +
                          " (expected " + std::to_string(kLabelMagic) + ")");
    const std::size_t ln = lr.u32("label count");
    if (ln != n)
        throw FormatError(labels_path + ": " + std::to_string(ln) + " labels for " +
                          std::to_string(n) + " images");
    const unsigned char* labels = lr.bytes(n, "label data");

    Dataset out;
    out.name = images_path;
    out.inputs = Matrix(n, d);
    for (std::size_t i = 0; i < n * d; ++i) out.inputs.data[i] = double(pixels[i]) / 255.0;
    out.labels.assign(labels, labels + n);
    return out;
}

void write_idx(const Dataset& d, std::size_t img_rows, std::size_t img_cols,
               const std::string& images_path, const std::string& labels_path) {
    if (img_rows * img_cols != d.dim())
        throw ShapeError("write_idx: " + std::to_string(img_rows) + "x" +
                         std::to_string(img_cols) + " does not match input dim " +
                         std::to_string(d.dim()));
    std::string img;
    put_u32_be(img, kImageMagic);
    put_u32_be(img, std::uint32_t(d.size()));
    put_u32_be(img, std::uint32_t(img_rows));
    put_u32_be(img, std::uint32_t(img_cols));
    for (double v : d.inputs.data) {
        const long p = std::lround(v * 255.0);
        img.push_back(char(std::clamp(p, 0L, 255L)));
    }
    io::write_file_atomic(images_path, img);

    std::string lab;
    put_u32_be(lab, kLabelMagic);
    put_u32_be(lab, std::uint32_t(d.size()));
    if (d.has_labels()) {
        for (std::uint32_t y : d.labels) lab.push_back(char(y));
    } else {
        lab.append(d.size(), '\0'); // unlabeled fixture: all-zero labels
    }
    io::write_file_atomic(labels_path, lab);
}

std::pair<Dataset, Dataset> split(const Dataset& d, double validation_fraction,
                                  std::uint64_t seed) {
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        throw ConfigError("split: validation fraction must be in [0,1), got " +
                          io::format_double(validation_fraction));
    std::vector<std::size_t> idx(d.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(idx);
    const std::size_t n_val = std::size_t(std::llround(validation_fraction * double(d.size())));

    auto take = [&](std::size_t from, std::size_t count, const char* suffix) {
        Dataset part;
        part.name = d.name + suffix;
        part.inputs = Matrix(count, d.dim());
        if (d.has_labels()) part.labels.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t src = idx[from + i];
            std::copy_n(d.inputs.row(src), d.dim(), part.inputs.row(i));
            if (d.has_labels()) part.labels[i] = d.labels[src];
        }
        return part;
    };
    Dataset val = take(0, n_val, "/val");
    Dataset train = take(n_val, d.size() - n_val, "/train");
    return {std::move(train), std::move(val)};
}

Dataset synthetic_two_gaussians(std::size_t n, std::size_t dims, double separation,
                                std::uint64_t seed) {
    if (n % 2 != 0) throw ConfigError("synthetic_two_gaussians: n must be even");
    if (dims == 0) throw ConfigError("synthetic_two_gaussians: dims must be positive");
    Rng rng(seed);
    Dataset d;
    d.name = "two-gaussians";
    d.inputs = Matrix(n, dims);
    d.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t cls = i % 2;
        d.labels[i] = cls;
        double* row = d.inputs.row(i);
        for (std::size_t j = 0; j < dims; ++j) row[j] = rng.normal();
        row[0] += (cls == 0 ? -0.5 : 0.5) * separation;
    }
    return d;
}

namespace {

constexpr std::size_t kImg = 28;
constexpr std::size_t kStyles = 7; // distinct variants per class, like handwriting styles
constexpr std::size_t kBlobs = 6;

struct Blob {
    double cx, cy, sigma, amp;
};

// Fixed per-class, per-style blob arrangements, independent of the dataset
// seed so every generated set shares one class definition. Small, bright
// blobs give stroke-like images: mostly exact-zero background with
// saturated foreground, similar to handwritten-digit scans. Centers are
// confined to the middle of the canvas so classes overlap spatially and
// can only be told apart by arrangement, not by which pixels are used.
std::vector<Blob> style_template(std::uint32_t cls, std::uint32_t style) {
    Rng rng = Rng::forked(0x5eedd161u, cls * 16 + style);
    std::vector<Blob> blobs(kBlobs);
    for (auto& b : blobs) {
        b.cx = 9.0 + 10.0 * rng.uniform();
        b.cy = 9.0 + 10.0 * rng.uniform();
        b.sigma = 0.9 + 1.1 * rng.uniform();
        b.amp = 0.8 + 0.5 * rng.uniform();
    }
    return blobs;
}

void render_blob(std::vector<double>& img, double cx, double cy, double sigma, double amp) {
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    const long lo_y = std::max(0L, std::lround(cy - 3 * sigma));
    const long hi_y = std::min(long(kImg) - 1, std::lround(cy + 3 * sigma));
    const long lo_x = std::max(0L, std::lround(cx - 3 * sigma));
    const long hi_x = std::min(long(kImg) - 1, std::lround(cx + 3 * sigma));
    for (long y = lo_y; y <= hi_y; ++y)
        for (long x = lo_x; x <= hi_x; ++x) {
            const double r2 =
                (double(x) - cx) * (double(x) - cx) + (double(y) - cy) * (double(y) - cy);
            img[std::size_t(y) * kImg + std::size_t(x)] += amp * std::exp(-r2 * inv2s2);
        }
}

} // namespace

Dataset synthetic_digits(std::size_t n, std::uint64_t seed) {
    static const std::vector<std::vector<Blob>> templates = [] {
        std::vector<std::vector<Blob>> t;
        for (std::uint32_t c = 0; c < 10; ++c)
            for (std::uint32_t s = 0; s < kStyles; ++s) t.push_back(style_template(c, s));
        return t;
    }();

    Rng rng(seed);
    Dataset d;
    d.name = "synthetic-digits";
    d.inputs = Matrix(n, kImg * kImg);
    d.labels.resize(n);
    std::vector<double> img(kImg * kImg);

    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t cls = std::uint32_t(i % 10);
        d.labels[i] = cls;
        std::fill(img.begin(), img.end(), 0.0);

        const std::size_t style = rng.below(kStyles);
        const double dx = double(rng.below(9)) - 4.0;
        const double dy = double(rng.below(9)) - 4.0;
        const double gain = 0.8 + 0.4 * rng.uniform();
        for (const Blob& b : templates[cls * kStyles + style]) {
            const double cx = b.cx + dx + 1.3 * rng.normal();
            const double cy = b.cy + dy + 1.3 * rng.normal();
            const double sigma = b.sigma * (0.8 + 0.4 * rng.uniform());
            const double amp = gain * b.amp * (0.85 + 0.3 * rng.uniform());
            render_blob(img, cx, cy, sigma, amp);
        }
        // unlabeled clutter: every sample gets a stray stroke somewhere
        render_blob(img, 2.0 + 24.0 * rng.uniform(), 2.0 + 24.0 * rng.uniform(),
                    0.9 + 0.9 * rng.uniform(), 0.5 + 0.5 * rng.uniform());
        // cut the dim gaussian tails so strokes are crisp and the background
        // is exact zero, like thresholded digit scans
        for (std::size_t p = 0; p < img.size(); ++p)
            if (img[p] < 0.12) img[p] = 0.0;
        // sparse speckle noise on top
        for (std::size_t p = 0; p < img.size(); ++p)
            if (rng.uniform() < 0.02) img[p] += 0.2 * std::abs(rng.normal());

        double* row = d.inputs.row(i);
        for (std::size_t p = 0; p < img.size(); ++p) {
            const long q = std::clamp(std::lround(std::clamp(img[p], 0.0, 1.0) * 255.0), 0L, 255L);
            row[p] = double(q) / 255.0;
        }
    }
    return d;
}

} // namespace elulab::data
