#include <cmath>
#include <cstdio>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "elulab/errors.hpp"
#include "elulab/io.hpp"
#include "elulab/network.hpp"
#include "elulab/rng.hpp"
#include "support/oracles.hpp"

using namespace elulab;

namespace {

Matrix random_inputs(std::size_t n, std::size_t d, Rng& rng) {
    Matrix x(n, d);
    for (auto& v : x.data) v = 2.0 * rng.uniform() - 1.0;
    return x;
}

// Hand-rolled forward pass: plain loops, no shared code with the library.
Matrix oracle_forward(const Network& net, const Matrix& x) {
    Matrix a = x;
    for (const Layer& layer : net.layers) {
        Matrix z(a.rows, layer.fan_out());
        for (std::size_t i = 0; i < a.rows; ++i)
            for (std::size_t u = 0; u < layer.fan_out(); ++u) {
                double s = layer.bias[u];
                for (std::size_t j = 0; j < a.cols; ++j) s += layer.weights(u, j) * a(i, j);
                z(i, u) = s;
            }
        if (layer.mode == Layer::Mode::activation) {
            for (auto& v : z.data) v = act::forward(layer.kind, v);
        } else if (layer.mode == Layer::Mode::softmax) {
            for (std::size_t i = 0; i < z.rows; ++i) {
                double mx = z(i, 0);
                for (std::size_t j = 1; j < z.cols; ++j) mx = std::max(mx, z(i, j));
                double sum = 0;
                for (std::size_t j = 0; j < z.cols; ++j) sum += std::exp(z(i, j) - mx);
                for (std::size_t j = 0; j < z.cols; ++j) z(i, j) = std::exp(z(i, j) - mx) / sum;
            }
        }
        a = z;
    }
    return a;
}

void zero_weights(Network& net) {
    for (Layer& layer : net.layers) {
        for (auto& w : layer.weights.data) w = 0.0;
        for (auto& b : layer.bias.data) b = 0.0;
    }
}

// Flatten a parameter reference: returns pointers to every weight and bias.
std::vector<double*> all_params(Network& net) {
    std::vector<double*> ps;
    for (Layer& layer : net.layers) {
        for (auto& w : layer.weights.data) ps.push_back(&w);
        for (auto& b : layer.bias.data) ps.push_back(&b);
    }
    return ps;
}

std::vector<double> flat_grads(const Gradients& g) {
    std::vector<double> out;
    for (const auto& lg : g.layers) {
        out.insert(out.end(), lg.d_weights.data.begin(), lg.d_weights.data.end());
        out.insert(out.end(), lg.d_bias.data.begin(), lg.d_bias.data.end());
    }
    return out;
}

} // namespace

TEST_CASE("init_he determinism and statistics") {
    const std::vector<std::size_t> sizes = {784, 128, 10};
    const std::vector<ActivationKind> acts = {ActivationKind::elu()};
    const Network a = init_he(sizes, acts, Loss::softmax_cross_entropy, 7);
    const Network b = init_he(sizes, acts, Loss::softmax_cross_entropy, 7);
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        CHECK(std::memcmp(a.layers[l].weights.data.data(), b.layers[l].weights.data.data(),
                          a.layers[l].weights.data.size() * sizeof(double)) == 0);
        for (double bias : a.layers[l].bias.data) CHECK(bias == 0.0);
    }
    const Network c = init_he(sizes, acts, Loss::softmax_cross_entropy, 8);
    CHECK(std::memcmp(a.layers[0].weights.data.data(), c.layers[0].weights.data.data(),
                      a.layers[0].weights.data.size() * sizeof(double)) != 0);

    // fan_in 200 into 128 units = 25600 samples; std should be near sqrt(2/200)
    const Network d =
        init_he({200, 128, 10}, {ActivationKind::relu()}, Loss::softmax_cross_entropy, 3);
    double sum = 0, sq = 0;
    for (double w : d.layers[0].weights.data) {
        sum += w;
        sq += w * w;
    }
    const double n = double(d.layers[0].weights.data.size());
    const double std_dev = std::sqrt(sq / n - (sum / n) * (sum / n));
    CHECK(std_dev == doctest::Approx(std::sqrt(2.0 / 200)).epsilon(0.10));

    CHECK_THROWS_AS(init_he({4}, {}, Loss::softmax_cross_entropy, 0), ConfigError);
    CHECK_THROWS_AS(init_he({4, 3}, {ActivationKind::elu()}, Loss::softmax_cross_entropy, 0),
                    ConfigError);
    CHECK_THROWS_AS(init_he({4, 0, 3}, {ActivationKind::elu()}, Loss::softmax_cross_entropy, 0),
                    ConfigError);
}

TEST_CASE("forward pass") {
    Rng rng(11);

    SUBCASE("zero weights: hidden f(0), softmax uniform") {
        Network net = init_he({5, 4, 3}, {ActivationKind::elu()}, Loss::softmax_cross_entropy, 1);
        zero_weights(net);
        const ForwardTrace t = forward(net, random_inputs(6, 5, rng));
        for (double v : t.activations[0].data) CHECK(v == 0.0);
        for (double v : t.output().data) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));
    }

    SUBCASE("single linear identity layer reproduces the input") {
        Network net;
        net.loss = Loss::mean_squared_error;
        Layer layer;
        layer.weights = Matrix::identity(4);
        layer.bias = Vector(4);
        layer.mode = Layer::Mode::linear;
        net.layers.push_back(layer);
        const Matrix x = random_inputs(3, 4, rng);
        const ForwardTrace t = forward(net, x);
        CHECK(oracle::max_abs_diff(t.output(), x) == 0.0);
    }

    SUBCASE("matches the two-loop oracle") {
        const Network net =
            init_he({7, 6, 5}, {ActivationKind::elu()}, Loss::softmax_cross_entropy, 21);
        const Matrix x = random_inputs(9, 7, rng);
        CHECK(oracle::max_abs_diff(forward(net, x).output(), oracle_forward(net, x)) < 1e-12);
    }

    SUBCASE("softmax rows sum to one") {
        const Network net =
            init_he({6, 8, 4}, {ActivationKind::lrelu()}, Loss::softmax_cross_entropy, 5);
        const ForwardTrace t = forward(net, random_inputs(17, 6, rng));
        for (std::size_t i = 0; i < t.output().rows; ++i) {
            double s = 0;
            for (std::size_t j = 0; j < t.output().cols; ++j) s += t.output()(i, j);
            CHECK(std::abs(s - 1.0) <= 1e-12);
        }
    }

    SUBCASE("shape mismatch throws") {
        const Network net =
            init_he({6, 4, 3}, {ActivationKind::relu()}, Loss::softmax_cross_entropy, 5);
        CHECK_THROWS_AS(forward(net, Matrix(2, 5)), ShapeError);
    }
}

TEST_CASE("backprop_loss") {
    Rng rng(23);

    SUBCASE("zero gradient at an exact MSE minimum") {
        Network net;
        net.loss = Loss::mean_squared_error;
        Layer layer;
        layer.weights = Matrix::identity(4);
        layer.bias = Vector(4);
        layer.mode = Layer::Mode::linear;
        net.layers.push_back(layer);
        const Matrix x = random_inputs(5, 4, rng);
        const Gradients g = backprop_loss(net, forward(net, x), x);
        for (double v : flat_grads(g)) CHECK(v == 0.0);
    }

    SUBCASE("softmax-CE output delta is (softmax - one-hot)/batch") {
        Network net = init_he({4, 3}, {}, Loss::softmax_cross_entropy, 9);
        const Matrix x = random_inputs(6, 4, rng);
        const ForwardTrace t = forward(net, x);
        const std::vector<std::uint32_t> labels = {0, 1, 2, 1, 0, 2};
        const Matrix targets = one_hot(labels, 3);
        const Gradients g = backprop_loss(net, t, targets);
        // d_bias of the only layer equals the column sums of the output delta
        for (std::size_t j = 0; j < 3; ++j) {
            double want = 0;
            for (std::size_t i = 0; i < 6; ++i) want += (t.output()(i, j) - targets(i, j)) / 6.0;
            CHECK(g.layers[0].d_bias[j] == doctest::Approx(want).epsilon(1e-12));
        }
    }

    SUBCASE("finite differences, every activation kind and both losses") {
        const ActivationKind kinds[] = {ActivationKind::elu(), ActivationKind::relu(),
                                        ActivationKind::lrelu(), ActivationKind::srelu()};
        for (const auto& kind : kinds) {
            for (Loss loss : {Loss::softmax_cross_entropy, Loss::mean_squared_error}) {
                Network net = init_he({4, 6, 5, 3}, {kind, kind}, loss, 31);
                // nudge biases off zero so no net input sits exactly on a
                // kink, where the FD oracle itself is invalid
                for (Layer& layer : net.layers)
                    for (auto& b : layer.bias.data) b = 0.05 + 0.1 * rng.uniform();
                const Matrix x = random_inputs(5, 4, rng);
                Matrix targets;
                if (loss == Loss::softmax_cross_entropy) {
                    targets = one_hot({0, 2, 1, 1, 0}, 3);
                } else {
                    targets = random_inputs(5, 3, rng);
                }
                const std::vector<double> analytic =
                    flat_grads(backprop_loss(net, forward(net, x), targets));
                const auto params = all_params(net);
                REQUIRE(analytic.size() == params.size());
                const double h = 1e-5;
                CAPTURE(act::to_string(kind));
                CAPTURE(int(loss));
                for (std::size_t p = 0; p < params.size(); ++p) {
                    CAPTURE(p);
                    const double keep = *params[p];
                    *params[p] = keep + h;
                    const double up = loss_value(net, forward(net, x).output(), targets);
                    *params[p] = keep - h;
                    const double dn = loss_value(net, forward(net, x).output(), targets);
                    *params[p] = keep;
                    const double fd = (up - dn) / (2 * h);
                    const double got = analytic[p];
                    if (std::abs(fd) < 1e-10 && std::abs(got) < 1e-10) continue;
                    CHECK(std::abs(fd - got) <= 1e-6 * std::max(std::abs(fd), std::abs(got)));
                }
            }
        }
    }

    SUBCASE("determinism: identical bytes across repeated runs") {
        const Network net =
            init_he({6, 5, 4}, {ActivationKind::elu()}, Loss::softmax_cross_entropy, 2);
        Rng r2(23); // same stream as rng at construction
        const Matrix x = random_inputs(7, 6, r2);
        const Matrix targets = one_hot({0, 1, 2, 3, 0, 1, 2}, 4);
        const auto g1 = flat_grads(backprop_loss(net, forward(net, x), targets));
        const auto g2 = flat_grads(backprop_loss(net, forward(net, x), targets));
        CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(double)) == 0);
    }
}

TEST_CASE("backprop_logprob_delta") {
    Rng rng(37);
    Network net = init_he({5, 6, 6, 4}, {ActivationKind::elu(), ActivationKind::elu()},
                          Loss::softmax_cross_entropy, 13);
    const Matrix x = random_inputs(8, 5, rng);
    const ForwardTrace t = forward(net, x);
    std::vector<std::uint32_t> labels;
    for (std::size_t i = 0; i < 8; ++i) labels.push_back(std::uint32_t(rng.below(4)));

    SUBCASE("output-layer delta is one-hot minus softmax") {
        for (std::size_t u = 0; u < 4; ++u) {
            const Vector d = backprop_logprob_delta(net, t, labels, {3, u});
            for (std::size_t i = 0; i < 8; ++i) {
                const double want = (labels[i] == u ? 1.0 : 0.0) - t.output()(i, u);
                CHECK(d[i] == doctest::Approx(want).epsilon(1e-12));
            }
        }
    }

    SUBCASE("matches finite difference of ln p under a net-input nudge") {
        const LayerUnitRef unit{2, 3};
        const Vector d = backprop_logprob_delta(net, t, labels, unit);
        const double h = 1e-6;
        for (std::size_t i = 0; i < 3; ++i) { // a few examples suffice
            auto lnp_with_nudge = [&](double eps) {
                // rerun the forward pass, injecting eps into the unit's net input
                Matrix a(1, x.cols);
                for (std::size_t j = 0; j < x.cols; ++j) a(0, j) = x(i, j);
                for (std::size_t l = 0; l < net.layer_count(); ++l) {
                    const Layer& layer = net.layers[l];
                    Matrix z(1, layer.fan_out());
                    for (std::size_t u = 0; u < layer.fan_out(); ++u) {
                        double s = layer.bias[u];
                        for (std::size_t j = 0; j < a.cols; ++j) s += layer.weights(u, j) * a(0, j);
                        z(0, u) = s;
                    }
                    if (l == unit.layer - 1) z(0, unit.unit) += eps;
                    if (layer.mode == Layer::Mode::activation) {
                        for (auto& v : z.data) v = act::forward(layer.kind, v);
                        a = z;
                    } else { // softmax output
                        double mx = z(0, 0);
                        for (std::size_t j = 1; j < z.cols; ++j) mx = std::max(mx, z(0, j));
                        double sum = 0;
                        for (std::size_t j = 0; j < z.cols; ++j) sum += std::exp(z(0, j) - mx);
                        return z(0, labels[i]) - mx - std::log(sum);
                    }
                }
                return 0.0;
            };
            const double fd = (lnp_with_nudge(h) - lnp_with_nudge(-h)) / (2 * h);
            CHECK(std::abs(fd - d[i]) <= 1e-6 * std::max(1.0, std::abs(d[i])));
        }
    }

    SUBCASE("zero downstream weights kill the delta") {
        Network cut = net;
        for (std::size_t l = 2; l < cut.layer_count(); ++l)
            for (auto& w : cut.layers[l].weights.data) w = 0.0;
        const ForwardTrace tc = forward(cut, x);
        const Vector d = backprop_logprob_delta(cut, tc, labels, {2, 1});
        for (std::size_t i = 0; i < d.len(); ++i) CHECK(d[i] == 0.0);
    }

    SUBCASE("bias gradient consistency: d loss / d w0 = -mean(delta)") {
        const Gradients g = backprop_loss(net, t, one_hot(labels, 4));
        for (std::size_t u = 0; u < net.layers[1].fan_out(); ++u) {
            const Vector d = backprop_logprob_delta(net, t, labels, {2, u});
            double mean = 0;
            for (std::size_t i = 0; i < d.len(); ++i) mean += d[i];
            mean /= double(d.len());
            CHECK(g.layers[1].d_bias[u] == doctest::Approx(-mean).epsilon(1e-10));
        }
    }

    SUBCASE("index and mode errors") {
        CHECK_THROWS_AS(backprop_logprob_delta(net, t, labels, {0, 0}), IndexError);
        CHECK_THROWS_AS(backprop_logprob_delta(net, t, labels, {4, 0}), IndexError);
        CHECK_THROWS_AS(backprop_logprob_delta(net, t, labels, {2, 6}), IndexError);
        Network mse = init_he({5, 4, 5}, {ActivationKind::elu()}, Loss::mean_squared_error, 1);
        const ForwardTrace tm = forward(mse, x);
        CHECK_THROWS_AS(backprop_logprob_delta(mse, tm, labels, {1, 0}), ConfigError);
    }
}

TEST_CASE("network serialization round-trip") {
    Rng rng(53);
    const Network net = init_he({6, 5, 4, 3}, {ActivationKind::elu(0.7), ActivationKind::lrelu(0.2)},
                                Loss::softmax_cross_entropy, 99);
    const char* path = "test_net.bin";
    save_network(net, path);
    const Network back = load_network(path);

    REQUIRE(back.layer_count() == net.layer_count());
    CHECK(back.loss == net.loss);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        CHECK(back.layers[l].mode == net.layers[l].mode);
        if (net.layers[l].mode == Layer::Mode::activation)
            CHECK(back.layers[l].kind == net.layers[l].kind);
        CHECK(std::memcmp(back.layers[l].weights.data.data(), net.layers[l].weights.data.data(),
                          net.layers[l].weights.data.size() * sizeof(double)) == 0);
        CHECK(std::memcmp(back.layers[l].bias.data.data(), net.layers[l].bias.data.data(),
                          net.layers[l].bias.len() * sizeof(double)) == 0);
    }

    // same outputs after the round-trip
    const Matrix x = random_inputs(4, 6, rng);
    CHECK(oracle::max_abs_diff(forward(net, x).output(), forward(back, x).output()) == 0.0);

    SUBCASE("wrong magic is reported with the observed bytes") {
        std::string bytes = elulab::io::read_file(path);
        bytes[0] = 'X';
        elulab::io::write_file_atomic("test_net_bad.bin", bytes);
        CHECK_THROWS_WITH_AS(load_network("test_net_bad.bin"), doctest::Contains("XLUNET01"),
                             FormatError);
        std::remove("test_net_bad.bin");
    }
    SUBCASE("truncation is a length error") {
        const std::string bytes = elulab::io::read_file(path);
        elulab::io::write_file_atomic("test_net_trunc.bin", bytes.substr(0, bytes.size() / 2));
        CHECK_THROWS_AS(load_network("test_net_trunc.bin"), LengthError);
        std::remove("test_net_trunc.bin");
    }
    SUBCASE("trailing bytes are rejected") {
        const std::string bytes = elulab::io::read_file(path) + "zz";
        elulab::io::write_file_atomic("test_net_trail.bin", bytes);
        CHECK_THROWS_AS(load_network("test_net_trail.bin"), FormatError);
        std::remove("test_net_trail.bin");
    }
    std::remove(path);
}

TEST_CASE("one_hot") {
    const Matrix t = one_hot({2, 0}, 3);
    CHECK(t(0, 2) == 1.0);
    CHECK(t(0, 0) == 0.0);
    CHECK(t(1, 0) == 1.0);
    CHECK_THROWS_AS(one_hot({5}, 3), IndexError);
}
