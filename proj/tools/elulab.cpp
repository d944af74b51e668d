// Command-line front end: trains the classifier and autoencoder setups,
// records activation traces, and runs the natural-gradient / lemma checkers.
// Exit codes: 0 success, 1 module or identity failure, 2 usage or input-file
// problems.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "elulab/activations.hpp"
#include "elulab/data.hpp"
#include "elulab/diagnostics.hpp"
#include "elulab/errors.hpp"
#include "elulab/fisher.hpp"
#include "elulab/io.hpp"
#include "elulab/network.hpp"
#include "elulab/optimizer.hpp"

using namespace elulab;

namespace {

struct RunConfig {
    std::string activation = "elu";
    double alpha = 1.0;
    bool alpha_given = false;
    std::optional<double> lr; // command-dependent default when unset
    double momentum = 0.0;
    std::size_t batch_size = 64;
    std::optional<std::size_t> epochs;
    std::vector<std::uint64_t> seeds = {0};
    std::string mnist_dir;
    std::string out = "out";
    std::string delta_mode = "observed";
    std::size_t cases = 100;
    std::size_t train_size = 12000;
    std::string net_path;
    std::string units = "";
    bool corrupt = false;
};

constexpr std::size_t kProbeSize = 2048;
constexpr double kValidationFraction = 1.0 / 6.0;
constexpr std::uint64_t kSplitSeed = 0;
constexpr std::uint64_t kSyntheticSeed = 12345;

ActivationKind resolve_activation(const RunConfig& cfg) {
    if (cfg.alpha_given) {
        if (cfg.activation == "elu") return ActivationKind::elu(cfg.alpha);
        if (cfg.activation == "lrelu") return ActivationKind::lrelu(cfg.alpha);
        throw ConfigError("--alpha only applies to elu and lrelu");
    }
    return act::parse(cfg.activation);
}

// Training data resolution: real IDX files when a directory is given (flag
// or ELULAB_MNIST_DIR), otherwise the deterministic synthetic digit set.
Dataset load_train_data(const RunConfig& cfg) {
    std::string dir = cfg.mnist_dir;
    if (dir.empty())
        if (const char* env = std::getenv("ELULAB_MNIST_DIR")) dir = env;
    if (!dir.empty())
        return data::load_mnist_idx(dir + "/train-images-idx3-ubyte",
                                    dir + "/train-labels-idx1-ubyte");
    return data::synthetic_digits(cfg.train_size, kSyntheticSeed);
}

// Optional held-out test set: the t10k pair when real files are in play,
// nothing for synthetic data (the caller splits instead).
std::optional<Dataset> load_test_data(const RunConfig& cfg) {
    std::string dir = cfg.mnist_dir;
    if (dir.empty())
        if (const char* env = std::getenv("ELULAB_MNIST_DIR")) dir = env;
    if (dir.empty()) return std::nullopt;
    const std::string images = dir + "/t10k-images-idx3-ubyte";
    if (!std::filesystem::exists(images)) return std::nullopt;
    return data::load_mnist_idx(images, dir + "/t10k-labels-idx1-ubyte");
}

Dataset probe_subset(const Dataset& d) {
    const std::size_t n = std::min(kProbeSize, d.size());
    Dataset probe;
    probe.name = d.name + "/probe";
    probe.inputs = Matrix(n, d.dim());
    std::copy_n(d.inputs.data.begin(), n * d.dim(), probe.inputs.data.begin());
    if (d.has_labels()) probe.labels.assign(d.labels.begin(), d.labels.begin() + long(n));
    return probe;
}

std::string seed_dir(const std::string& out, std::uint64_t seed) {
    return out + "/seed" + std::to_string(seed);
}

std::vector<LayerUnitRef> parse_units(const std::string& spec, const Network& net) {
    std::vector<LayerUnitRef> units;
    if (spec.empty()) {
        // default: the first two units of every hidden layer
        for (std::size_t l = 1; l < net.layer_count(); ++l)
            for (std::size_t u = 0; u < std::min<std::size_t>(2, net.layers[l - 1].fan_out()); ++u)
                units.push_back({l, u});
        return units;
    }
    std::size_t pos = 0;
    while (pos < spec.size()) {
        const std::size_t comma = std::min(spec.find(',', pos), spec.size());
        const std::string item = spec.substr(pos, comma - pos);
        const std::size_t colon = item.find(':');
        if (colon == std::string::npos)
            throw ConfigError("--units entries must look like layer:unit, got '" + item + "'");
        try {
            units.push_back({std::stoul(item.substr(0, colon)), std::stoul(item.substr(colon + 1))});
        } catch (const std::exception&) {
            throw ConfigError("--units entries must be numeric layer:unit, got '" + item + "'");
        }
        pos = comma + 1;
    }
    if (units.empty()) throw ConfigError("--units is empty");
    return units;
}

// ---------------------------------------------------------------- commands

int cmd_train(const RunConfig& cfg) {
    const ActivationKind kind = resolve_activation(cfg);
    Dataset full = load_train_data(cfg);
    auto [train_set, val_set] = data::split(full, kValidationFraction, kSplitSeed);
    Dataset probe = probe_subset(train_set);

    TrainConfig tc;
    tc.learning_rate = cfg.lr.value_or(0.01);
    tc.momentum = cfg.momentum;
    tc.batch_size = cfg.batch_size;
    tc.epochs = cfg.epochs.value_or(20);

    const std::vector<std::size_t> sizes = {train_set.dim(), 128, 128, 128, 128,
                                            128,             128, 128, 128, 10};
    const std::vector<ActivationKind> kinds(8, kind);

    for (std::uint64_t seed : cfg.seeds) {
        const std::string dir = seed_dir(cfg.out, seed);
        std::filesystem::create_directories(dir);

        Network net = init_he(sizes, kinds, Loss::softmax_cross_entropy, seed);
        ActivationTrace trace = diagnostics::make_trace(net);
        tc.shuffle_seed = seed;
        std::vector<EpochMetrics> metrics; // hook-collected so partial runs keep their rows
        EpochHook hook = [&](const Network& n, EpochMetrics& m) {
            diagnostics::append_epoch(trace, m.epoch, n, probe);
            m.median_activation = diagnostics::trace_summary(trace).back();
            metrics.push_back(m);
        };

        // divergence is a result, not a malfunction: record what we have,
        // keep going with the other seeds
        std::string diverged;
        try {
            optimizer::train(net, train_set, val_set, tc, {hook});
        } catch (const DivergenceError& e) {
            diverged = e.what();
        } catch (const DomainError& e) {
            diverged = e.what(); // weights went non-finite before the gradient did
        }

        optimizer::write_metrics_csv(metrics, dir + "/metrics.csv");
        diagnostics::write_trace_csv(trace, dir + "/trace.csv");
        diagnostics::write_summary_csv(trace, dir + "/summary.csv");
        if (diverged.empty()) save_network(net, dir + "/network.bin");

        if (!diverged.empty()) {
            std::cout << "seed " << seed << ": DIVERGED after " << metrics.size()
                      << " recorded epochs (" << diverged << ")\n";
        } else {
            const EpochMetrics& last = metrics.back();
            std::cout << "seed " << seed << ": train_loss " << io::format_double(last.train_loss)
                      << " eval_loss " << io::format_double(last.eval_loss) << " accuracy "
                      << io::format_double(last.accuracy.value_or(0.0)) << " median_activation "
                      << io::format_double(last.median_activation.value_or(0.0)) << "\n";
        }
    }
    return 0;
}

int cmd_autoencoder(const RunConfig& cfg) {
    const ActivationKind kind = resolve_activation(cfg);
    Dataset full = load_train_data(cfg);
    Dataset train_set, test_set;
    if (std::optional<Dataset> t10k = load_test_data(cfg)) {
        train_set = std::move(full);
        test_set = std::move(*t10k);
    } else {
        std::tie(train_set, test_set) = data::split(full, kValidationFraction, kSplitSeed);
    }

    const std::vector<double> lrs =
        cfg.lr ? std::vector<double>{*cfg.lr} : std::vector<double>{1e-2, 1e-3, 1e-4, 1e-5};
    const std::size_t d = train_set.dim();
    const std::vector<std::size_t> sizes = {d, 1000, 500, 250, 30, 250, 500, 1000, d};
    const std::vector<ActivationKind> kinds(7, kind);

    for (double lr : lrs) {
        for (std::uint64_t seed : cfg.seeds) {
            const std::string dir =
                cfg.out + "/lr" + io::format_double(lr) + "/seed" + std::to_string(seed);
            std::filesystem::create_directories(dir);

            Network net = init_he(sizes, kinds, Loss::mean_squared_error, seed);
            TrainConfig tc;
            tc.learning_rate = lr;
            tc.momentum = cfg.momentum;
            tc.batch_size = cfg.batch_size;
            tc.epochs = cfg.epochs.value_or(50);
            tc.shuffle_seed = seed;

            std::string csv = "epoch,train_mse,test_mse\n";
            std::size_t rows = 0;
            double last_test = 0.0;
            EpochHook hook = [&](const Network& n, EpochMetrics& m) {
                const double train_mse = diagnostics::reconstruction_error(n, train_set);
                last_test = diagnostics::reconstruction_error(n, test_set);
                csv += std::to_string(m.epoch) + ',' + io::format_double(train_mse) + ',' +
                       io::format_double(last_test) + '\n';
                ++rows;
            };

            // a learning rate too hot to converge is a finding, not a crash;
            // keep the rows we got and move on through the sweep
            std::string diverged;
            try {
                optimizer::train(net, train_set, test_set, tc, {hook});
            } catch (const DivergenceError& e) {
                diverged = e.what();
            } catch (const DomainError& e) {
                diverged = e.what();
            }
            io::write_file_atomic(dir + "/recon.csv", csv);
            if (!diverged.empty())
                std::cout << "lr " << io::format_double(lr) << " seed " << seed
                          << ": DIVERGED after " << rows << " recorded epochs (" << diverged
                          << ")\n";
            else
                std::cout << "lr " << io::format_double(lr) << " seed " << seed << ": test_mse "
                          << io::format_double(last_test) << "\n";
        }
    }
    return 0;
}

int cmd_trace(const RunConfig& cfg) {
    if (cfg.net_path.empty()) throw IoError("trace: --net is required");
    Network net = load_network(cfg.net_path);
    Dataset full = load_train_data(cfg);
    auto [train_set, val_set] = data::split(full, kValidationFraction, kSplitSeed);
    Dataset probe = probe_subset(train_set);

    ActivationTrace trace = diagnostics::make_trace(net);
    diagnostics::append_epoch(trace, 0, net, probe);
    std::filesystem::create_directories(cfg.out);
    diagnostics::write_trace_csv(trace, cfg.out + "/trace.csv");
    diagnostics::write_summary_csv(trace, cfg.out + "/summary.csv");
    std::cout << "median of per-unit medians: "
              << io::format_double(diagnostics::trace_summary(trace).back()) << "\n";
    return 0;
}

int cmd_natgrad_check(const RunConfig& cfg) {
    if (cfg.net_path.empty()) throw IoError("natgrad-check: --net is required");
    Network net = load_network(cfg.net_path);
    DeltaMode mode;
    if (cfg.delta_mode == "observed")
        mode = DeltaMode::observed_label;
    else if (cfg.delta_mode == "sampled")
        mode = DeltaMode::model_sampled;
    else
        throw ConfigError("--delta-mode must be observed or sampled, got '" + cfg.delta_mode + "'");

    Dataset full = load_train_data(cfg);
    auto [train_set, val_set] = data::split(full, kValidationFraction, kSplitSeed);
    Dataset sample = probe_subset(train_set);
    const std::vector<LayerUnitRef> units = parse_units(cfg.units, net);

    // unit gradients for both sources: the whole sample set and one minibatch
    ForwardTrace trace = forward(net, sample.inputs);
    Dataset minibatch;
    minibatch.inputs = Matrix(std::min(cfg.batch_size, sample.size()), sample.dim());
    std::copy_n(sample.inputs.data.begin(), minibatch.inputs.data.size(),
                minibatch.inputs.data.begin());
    minibatch.labels.assign(sample.labels.begin(),
                            sample.labels.begin() + long(minibatch.inputs.rows));
    ForwardTrace mb_trace = forward(net, minibatch.inputs);

    nlohmann::json out = nlohmann::json::array();
    bool identities_ok = true;
    double sum_abs_k_minus_1 = 0.0;
    std::size_t k_count = 0;

    for (const LayerUnitRef unit : units) {
        UnitFisherEstimate est;
        try {
            est = fisher::estimate_unit_fisher(net, unit, sample, mode, 1, cfg.seeds[0]);
        } catch (const DegenerateFisherError& e) {
            std::cerr << "warning: unit " << unit.layer << ":" << unit.unit << " skipped: "
                      << e.what() << "\n";
            out.push_back({{"unit", unit.unit}, {"layer", unit.layer}, {"error", "degenerate"}});
            continue;
        }

        struct GradSource {
            const char* name;
            const ForwardTrace* trace;
            const std::vector<std::uint32_t>* labels;
        };
        const GradSource sources[2] = {{"full", &trace, &sample.labels},
                                       {"minibatch", &mb_trace, &minibatch.labels}};
        for (const GradSource& src : sources) {
            // loss gradient for this unit: -mean(delta a), -mean(delta)
            Vector delta = backprop_logprob_delta(net, *src.trace, *src.labels, unit);
            const Matrix& incoming = src.trace->incoming(unit.layer - 1);
            Vector g(incoming.cols);
            double g0 = 0.0;
            for (std::size_t i = 0; i < delta.len(); ++i) {
                g0 -= delta[i] / double(delta.len());
                for (std::size_t j = 0; j < incoming.cols; ++j)
                    g[j] -= delta[i] * incoming(i, j) / double(delta.len());
            }
            try {
                BiasShiftReport report = fisher::bias_shift_report(est, g, g0);
                nlohmann::json entry =
                    nlohmann::json::parse(fisher::bias_shift_json(report, est, unit));
                entry["g_source"] = src.name;
                out.push_back(std::move(entry));
                sum_abs_k_minus_1 += std::abs(report.k - 1.0);
                ++k_count;
            } catch (const IdentityCheckError& e) {
                std::cerr << "identity failure at unit " << unit.layer << ":" << unit.unit << " ("
                          << src.name << "): " << e.what() << "\n";
                out.push_back({{"unit", unit.unit},
                               {"layer", unit.layer},
                               {"g_source", src.name},
                               {"error", e.what()}});
                identities_ok = false;
            }
        }
    }

    std::filesystem::create_directories(cfg.out);
    io::write_file_atomic(cfg.out + "/natgrad.json", out.dump(2) + "\n");
    if (k_count > 0)
        std::cout << "mean |k-1| over " << k_count << " reports: "
                  << io::format_double(sum_abs_k_minus_1 / double(k_count)) << "\n";
    std::cout << (identities_ok ? "all identities within tolerance\n" : "identity check FAILED\n");
    return identities_ok ? 0 : 1;
}

int cmd_lemma_check(const RunConfig& cfg) {
    bool ok = true;
    for (const LemmaCheckResult& r : {fisher::check_lemma1(cfg.cases, cfg.seeds[0], cfg.corrupt),
                                      fisher::check_lemma2(cfg.cases, cfg.seeds[0], cfg.corrupt)}) {
        std::cout << r.name << ": " << r.cases << " cases, max deviation "
                  << io::format_double(r.max_error) << " (tolerance "
                  << io::format_double(r.tolerance) << "): " << (r.passed ? "PASS" : "FAIL")
                  << "\n";
        ok = ok && r.passed;
    }
    return ok ? 0 : 1;
}

// ------------------------------------------------------------- entry point

// Fill config values from a JSON file for every option the user did not pass
// on the command line (precedence: flags > config file > defaults).
void apply_config_file(const std::string& path, CLI::App& app, RunConfig& cfg) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("config file: ") + e.what());
    }
    auto unset = [&](const char* flag) {
        const CLI::Option* opt = app.get_option_no_throw(flag);
        return opt != nullptr && opt->count() == 0;
    };
    if (j.contains("activation") && unset("--activation")) cfg.activation = j["activation"];
    if (j.contains("alpha") && unset("--alpha")) {
        cfg.alpha = j["alpha"];
        cfg.alpha_given = true;
    }
    if (j.contains("lr") && unset("--lr")) cfg.lr = double(j["lr"]);
    if (j.contains("momentum") && unset("--momentum")) cfg.momentum = j["momentum"];
    if (j.contains("batch_size") && unset("--batch-size")) cfg.batch_size = j["batch_size"];
    if (j.contains("epochs") && unset("--epochs")) cfg.epochs = std::size_t(j["epochs"]);
    if (j.contains("seeds") && unset("--seeds"))
        cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("mnist_dir") && unset("--mnist-dir")) cfg.mnist_dir = j["mnist_dir"];
    if (j.contains("out") && unset("--out")) cfg.out = j["out"];
    if (j.contains("delta_mode") && unset("--delta-mode")) cfg.delta_mode = j["delta_mode"];
    if (j.contains("cases") && unset("--cases")) cfg.cases = std::size_t(j["cases"]);
    if (j.contains("train_size") && unset("--train-size"))
        cfg.train_size = std::size_t(j["train_size"]);
    if (j.contains("net") && unset("--net")) cfg.net_path = j["net"];
    if (j.contains("units") && unset("--units")) cfg.units = j["units"];
}

} // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    std::string config_path;
    double lr_flag = 0.0;
    std::size_t epochs_flag = 0;

    CLI::App app{"activation-function experiment runner"};
    app.require_subcommand(1);
    app.add_option("--config", config_path, "JSON config file (flags take precedence)");
    app.add_option("--activation", cfg.activation, "elu | elu:<alpha> | relu | lrelu:<alpha> | srelu");
    CLI::Option* alpha_opt = app.add_option("--alpha", cfg.alpha, "activation alpha parameter");
    CLI::Option* lr_opt = app.add_option("--lr", lr_flag, "learning rate");
    app.add_option("--momentum", cfg.momentum, "momentum in [0,1)");
    app.add_option("--batch-size", cfg.batch_size, "mini-batch size");
    CLI::Option* epochs_opt = app.add_option("--epochs", epochs_flag, "training epochs");
    app.add_option("--seeds", cfg.seeds, "comma-separated seed list")->delimiter(',');
    app.add_option("--mnist-dir", cfg.mnist_dir,
                   "directory with MNIST IDX files (else ELULAB_MNIST_DIR, else synthetic data)");
    app.add_option("--out", cfg.out, "output directory");
    app.add_option("--delta-mode", cfg.delta_mode, "observed | sampled");
    app.add_option("--cases", cfg.cases, "number of randomized check cases");
    app.add_option("--train-size", cfg.train_size, "synthetic training set size");
    app.add_option("--net", cfg.net_path, "trained network binary");
    app.add_option("--units", cfg.units, "comma-separated layer:unit list");
    app.add_flag("--corrupt", cfg.corrupt, "deliberately corrupt one check case (failure demo)")
        ->group(""); // hidden
    // shared options live on the parent; let subcommands pass unmatched
    // arguments back up so `elulab train --lr 0.01` works
    app.add_subcommand("train", "train MNIST-shaped classifiers, one per seed")->fallthrough();
    app.add_subcommand("autoencoder", "train the deep autoencoder over a learning-rate set")
        ->fallthrough();
    app.add_subcommand("trace", "record unit activation medians of a saved network")->fallthrough();
    app.add_subcommand("natgrad-check", "natural-gradient bias-shift reports for chosen units")
        ->fallthrough();
    app.add_subcommand("lemma-check", "randomized block-inverse and moment-bound checks")
        ->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // help/version exit 0, any parse problem is usage
    }

    try {
        cfg.alpha_given = alpha_opt->count() > 0;
        if (lr_opt->count() > 0) cfg.lr = lr_flag;
        if (epochs_opt->count() > 0) cfg.epochs = epochs_flag;
        if (!config_path.empty()) apply_config_file(config_path, app, cfg);
        if (cfg.seeds.empty()) throw ConfigError("--seeds must not be empty");

        if (app.got_subcommand("train")) return cmd_train(cfg);
        if (app.got_subcommand("autoencoder")) return cmd_autoencoder(cfg);
        if (app.got_subcommand("trace")) return cmd_trace(cfg);
        if (app.got_subcommand("natgrad-check")) return cmd_natgrad_check(cfg);
        return cmd_lemma_check(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 2;
    } catch (const LengthError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
