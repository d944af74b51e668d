#include "elulab/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "elulab/errors.hpp"
#include "elulab/io.hpp"
#include "elulab/kernels.hpp"
#include "elulab/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "network serialization assumes a little-endian host");

namespace elulab {

namespace {

void apply_softmax_rows(Matrix& m) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* r = m.row(i);
        double mx = r[0];
        for (std::size_t j = 1; j < m.cols; ++j) mx = std::max(mx, r[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            r[j] = std::exp(r[j] - mx);
            sum += r[j];
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < m.cols; ++j) r[j] *= inv;
    }
}

// dZ_{l-1} = (dZ_l * W_l) ⊙ f'(net_{l-1}); valid for l >= 1.
Matrix backprop_through(const Network& net, const ForwardTrace& trace, const Matrix& dz,
                        std::size_t l) {
    const Layer& layer = net.layers[l];
    Matrix da(dz.rows, layer.fan_in());
    kernels::gemm_nn(dz.rows, layer.fan_in(), dz.cols, dz.data.data(), dz.cols,
                     layer.weights.data.data(), layer.weights.cols, da.data.data(), da.cols);
    const Layer& prev = net.layers[l - 1];
    const Matrix& nets = trace.net_inputs[l - 1];
    for (std::size_t i = 0; i < da.data.size(); ++i)
        da.data[i] *= act::derivative(prev.kind, nets.data[i]);
    return da;
}

void check_labels(const std::vector<std::uint32_t>& labels, std::size_t batch,
                  std::size_t num_classes, const char* who) {
    if (labels.size() != batch)
        throw ShapeError(std::string(who) + ": " + std::to_string(labels.size()) +
                         " labels for a batch of " + std::to_string(batch));
    for (std::uint32_t y : labels)
        if (y >= num_classes)
            throw IndexError(std::string(who) + ": label " + std::to_string(y) +
                             " out of range for " + std::to_string(num_classes) + " classes");
}

} // namespace

Network init_he(const std::vector<std::size_t>& layer_sizes,
                const std::vector<ActivationKind>& activations, Loss loss, std::uint64_t seed) {
    if (layer_sizes.size() < 2)
        throw ConfigError("init_he: need at least input and output sizes, got " +
                          std::to_string(layer_sizes.size()));
    for (std::size_t s : layer_sizes)
        if (s == 0) throw ConfigError("init_he: zero-width layer");
    const std::size_t n_layers = layer_sizes.size() - 1;
    if (activations.size() != n_layers - 1)
        throw ConfigError("init_he: expected " + std::to_string(n_layers - 1) +
                          " hidden activations, got " + std::to_string(activations.size()));

    Rng rng(seed);
    Network net;
    net.loss = loss;
    net.layers.reserve(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        Layer layer;
        const std::size_t fan_in = layer_sizes[l];
        const std::size_t fan_out = layer_sizes[l + 1];
        layer.weights = Matrix(fan_out, fan_in);
        layer.bias = Vector(fan_out);
        const double std_dev = std::sqrt(2.0 / double(fan_in));
        for (auto& w : layer.weights.data) w = std_dev * rng.normal();
        if (l + 1 == n_layers) {
            layer.mode =
                loss == Loss::softmax_cross_entropy ? Layer::Mode::softmax : Layer::Mode::linear;
        } else {
            layer.mode = Layer::Mode::activation;
            layer.kind = activations[l];
        }
        net.layers.push_back(std::move(layer));
    }
    return net;
}

ForwardTrace forward(const Network& net, const Matrix& inputs) {
    if (inputs.cols != net.input_dim())
        throw ShapeError("forward: inputs " + inputs.shape_str() + " do not match input dim " +
                         std::to_string(net.input_dim()));
    ForwardTrace trace;
    trace.inputs = inputs;
    trace.net_inputs.reserve(net.layer_count());
    trace.activations.reserve(net.layer_count());

    const Matrix* prev = &trace.inputs;
    for (const Layer& layer : net.layers) {
        Matrix z(inputs.rows, layer.fan_out());
        kernels::gemm_nt(z.rows, z.cols, layer.fan_in(), prev->data.data(), prev->cols,
                         layer.weights.data.data(), layer.weights.cols, z.data.data(), z.cols);
        for (std::size_t i = 0; i < z.rows; ++i)
            kernels::axpy(z.cols, 1.0, layer.bias.data.data(), z.row(i));

        Matrix a;
        switch (layer.mode) {
        case Layer::Mode::activation:
            a = act::forward(layer.kind, z);
            break;
        case Layer::Mode::linear:
            a = z;
            break;
        case Layer::Mode::softmax:
            a = z;
            apply_softmax_rows(a);
            break;
        }
        trace.net_inputs.push_back(std::move(z));
        trace.activations.push_back(std::move(a));
        prev = &trace.activations.back();
    }
    return trace;
}

double loss_value(const Network& net, const Matrix& output, const Matrix& targets) {
    require_same_shape(output, targets, "loss_value");
    const double n = double(output.rows);
    double total = 0.0;
    if (net.loss == Loss::softmax_cross_entropy) {
        for (std::size_t i = 0; i < output.data.size(); ++i) {
            const double t = targets.data[i];
            if (t != 0.0) total -= t * std::log(std::max(output.data[i], 1e-300));
        }
    } else {
        // per-dimension mean, so the loss scale (and with it the usable
        // learning-rate range) does not grow with the output width
        for (std::size_t i = 0; i < output.data.size(); ++i) {
            const double d = output.data[i] - targets.data[i];
            total += 0.5 * d * d;
        }
        return total / (n * double(output.cols));
    }
    return total / n;
}

Gradients backprop_loss(const Network& net, const ForwardTrace& trace, const Matrix& targets) {
    const Matrix& out = trace.output();
    require_same_shape(out, targets, "backprop_loss");
    const std::size_t batch = out.rows;
    // For softmax + cross-entropy and for linear + MSE alike, the output
    // delta is (prediction - target) scaled by the loss normalization
    // (1/N for CE, 1/(N * dims) for the per-dimension-mean MSE).
    const double inv_n = net.loss == Loss::softmax_cross_entropy
                             ? 1.0 / double(batch)
                             : 1.0 / (double(batch) * double(out.cols));
    Matrix dz(out.rows, out.cols);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        dz.data[i] = (out.data[i] - targets.data[i]) * inv_n;

    Gradients grads;
    grads.layers.resize(net.layer_count());
    for (std::size_t l = net.layer_count(); l-- > 0;) {
        const Layer& layer = net.layers[l];
        const Matrix& ain = trace.incoming(l);
        LayerGrads& lg = grads.layers[l];
        lg.d_weights = Matrix(layer.fan_out(), layer.fan_in());
        lg.d_bias = Vector(layer.fan_out());
        kernels::gemm_tn(layer.fan_out(), layer.fan_in(), batch, dz.data.data(), dz.cols,
                         ain.data.data(), ain.cols, lg.d_weights.data.data(), lg.d_weights.cols,
                         false);
        for (std::size_t i = 0; i < batch; ++i)
            kernels::axpy(dz.cols, 1.0, dz.row(i), lg.d_bias.data.data());
        if (l > 0) dz = backprop_through(net, trace, dz, l);
    }
    return grads;
}

Vector backprop_logprob_delta(const Network& net, const ForwardTrace& trace,
                              const std::vector<std::uint32_t>& labels, LayerUnitRef unit) {
    if (net.loss != Loss::softmax_cross_entropy)
        throw ConfigError("backprop_logprob_delta: network must use softmax cross-entropy");
    if (unit.layer == 0)
        throw IndexError("backprop_logprob_delta: layer 0 is the input layer; dense layers are "
                         "numbered from 1");
    if (unit.layer > net.layer_count())
        throw IndexError("backprop_logprob_delta: layer " + std::to_string(unit.layer) +
                         " out of range (network has " + std::to_string(net.layer_count()) +
                         " dense layers)");
    const std::size_t l0 = unit.layer - 1; // 0-based dense layer index
    if (unit.unit >= net.layers[l0].fan_out())
        throw IndexError("backprop_logprob_delta: unit " + std::to_string(unit.unit) +
                         " out of range for layer of width " +
                         std::to_string(net.layers[l0].fan_out()));

    const Matrix& p = trace.output();
    check_labels(labels, p.rows, p.cols, "backprop_logprob_delta");

    // d ln p / d net_out = one-hot(y) - softmax, per example (no batch mean)
    Matrix dz(p.rows, p.cols);
    for (std::size_t i = 0; i < p.rows; ++i)
        for (std::size_t j = 0; j < p.cols; ++j)
            dz(i, j) = (j == labels[i] ? 1.0 : 0.0) - p(i, j);

    for (std::size_t l = net.layer_count() - 1; l > l0; --l)
        dz = backprop_through(net, trace, dz, l);

    Vector delta(dz.rows);
    for (std::size_t i = 0; i < dz.rows; ++i) delta[i] = dz(i, unit.unit);
    return delta;
}

Matrix one_hot(const std::vector<std::uint32_t>& labels, std::size_t num_classes) {
    check_labels(labels, labels.size(), num_classes, "one_hot");
    Matrix t(labels.size(), num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) t(i, labels[i]) = 1.0;
    return t;
}

namespace {

constexpr char kMagic[8] = {'E', 'L', 'U', 'N', 'E', 'T', '0', '1'};

void put_u32(std::string& out, std::uint32_t v) {
    out.append(reinterpret_cast<const char*>(&v), 4);
}

void put_f64(std::string& out, const double* vs, std::size_t n) {
    out.append(reinterpret_cast<const char*>(vs), n * sizeof(double));
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) const {
        if (pos + n > buf.size())
            throw LengthError(std::string("load_network: file ends inside ") + what);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v;
        std::memcpy(&v, buf.data() + pos, 4);
        pos += 4;
        return v;
    }
    std::string str(std::size_t n, const char* what) {
        need(n, what);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
    void f64s(double* dst, std::size_t n, const char* what) {
        need(n * sizeof(double), what);
        std::memcpy(dst, buf.data() + pos, n * sizeof(double));
        pos += n * sizeof(double);
    }
};

std::string layer_tag(const Layer& layer) {
    switch (layer.mode) {
    case Layer::Mode::activation:
        return act::to_string(layer.kind);
    case Layer::Mode::linear:
        return "linear";
    case Layer::Mode::softmax:
        return "softmax";
    }
    throw ConfigError("layer_tag: unknown mode");
}

} // namespace

void save_network(const Network& net, const std::string& path) {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u32(out, std::uint32_t(net.layer_count()));
    put_u32(out, std::uint32_t(net.input_dim()));
    for (const Layer& layer : net.layers) put_u32(out, std::uint32_t(layer.fan_out()));
    for (const Layer& layer : net.layers) {
        const std::string tag = layer_tag(layer);
        put_u32(out, std::uint32_t(tag.size()));
        out.append(tag);
    }
    for (const Layer& layer : net.layers)
        put_f64(out, layer.weights.data.data(), layer.weights.data.size());
    for (const Layer& layer : net.layers) put_f64(out, layer.bias.data.data(), layer.bias.len());
    io::write_file_atomic(path, out);
}

Network load_network(const std::string& path) {
    const std::string buf = io::read_file(path);
    Reader r{buf};
    const std::string magic = r.str(sizeof(kMagic), "magic");
    if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0)
        throw FormatError("load_network: bad magic '" + magic + "' (expected ELUNET01)");

    const std::uint32_t n_layers = r.u32("layer count");
    if (n_layers == 0) throw FormatError("load_network: zero layers");
    std::vector<std::size_t> dims(n_layers + 1);
    for (auto& d : dims) d = r.u32("layer dims");
    std::vector<std::string> tags(n_layers);
    for (auto& t : tags) t = r.str(r.u32("tag length"), "activation tag");

    Network net;
    net.layers.resize(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        Layer& layer = net.layers[l];
        layer.weights = Matrix(dims[l + 1], dims[l]);
        layer.bias = Vector(dims[l + 1]);
        const std::string& tag = tags[l];
        if (l + 1 == n_layers) {
            if (tag == "softmax") {
                layer.mode = Layer::Mode::softmax;
                net.loss = Loss::softmax_cross_entropy;
            } else if (tag == "linear") {
                layer.mode = Layer::Mode::linear;
                net.loss = Loss::mean_squared_error;
            } else {
                throw FormatError("load_network: output layer tag '" + tag +
                                  "' (expected softmax or linear)");
            }
        } else {
            layer.mode = Layer::Mode::activation;
            try {
                layer.kind = act::parse(tag);
            } catch (const ConfigError& e) {
                throw FormatError(std::string("load_network: bad activation tag: ") + e.what());
            }
        }
    }
    for (Layer& layer : net.layers)
        r.f64s(layer.weights.data.data(), layer.weights.data.size(), "weights");
    for (Layer& layer : net.layers) r.f64s(layer.bias.data.data(), layer.bias.len(), "biases");
    if (r.pos != buf.size())
        throw FormatError("load_network: " + std::to_string(buf.size() - r.pos) +
                          " trailing bytes");
    for (const Layer& layer : net.layers) layer.weights.require_finite("load_network");
    return net;
}

} // namespace elulab
