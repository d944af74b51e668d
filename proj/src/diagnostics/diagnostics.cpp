#include "elulab/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "elulab/errors.hpp"
#include "elulab/io.hpp"

namespace elulab::diagnostics {

namespace {

double median_inplace(std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::size_t hidden_layer_count(const Network& net) { return net.layer_count() - 1; }

// Appends the medians and means of every hidden unit, in layer order, to
// the two output vectors.
void probe_stats(const Network& net, const Dataset& probe, std::vector<double>& medians,
                 std::vector<double>& means) {
    if (probe.size() == 0) throw ConfigError("diagnostics: probe set is empty");
    ForwardTrace trace = forward(net, probe.inputs);
    std::vector<double> column(probe.size());
    for (std::size_t l = 0; l < hidden_layer_count(net); ++l) {
        const Matrix& acts = trace.activations[l];
        for (std::size_t u = 0; u < acts.cols; ++u) {
            double sum = 0.0;
            for (std::size_t i = 0; i < acts.rows; ++i) {
                column[i] = acts(i, u);
                sum += acts(i, u);
            }
            medians.push_back(median_inplace(column));
            means.push_back(sum / double(acts.rows));
        }
    }
}

double sample_variance(const double* x, std::size_t n) {
    if (n < 2) return 0.0;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x[i];
    mean /= double(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (x[i] - mean) * (x[i] - mean);
    return ss / double(n - 1);
}

} // namespace

Vector unit_medians(const Network& net, const Dataset& probe) {
    std::vector<double> medians, means;
    probe_stats(net, probe, medians, means);
    Vector out(medians.size());
    std::copy(medians.begin(), medians.end(), out.data.begin());
    return out;
}

ActivationTrace make_trace(const Network& net) {
    ActivationTrace t;
    t.layer_offsets.push_back(0);
    for (std::size_t l = 0; l < hidden_layer_count(net); ++l)
        t.layer_offsets.push_back(t.layer_offsets.back() + net.layers[l].fan_out());
    t.per_unit_medians = Matrix(0, t.layer_offsets.back());
    t.per_unit_means = Matrix(0, t.layer_offsets.back());
    return t;
}

void append_epoch(ActivationTrace& trace, std::size_t epoch, const Network& net,
                  const Dataset& probe) {
    std::vector<double> medians, means;
    probe_stats(net, probe, medians, means);
    if (medians.size() != trace.per_unit_medians.cols)
        throw ShapeError("append_epoch: " + std::to_string(medians.size()) + " units for a trace of " +
                         std::to_string(trace.per_unit_medians.cols));
    trace.epochs.push_back(epoch);
    trace.per_unit_medians.rows += 1;
    trace.per_unit_medians.data.insert(trace.per_unit_medians.data.end(), medians.begin(),
                                       medians.end());
    trace.per_unit_means.rows += 1;
    trace.per_unit_means.data.insert(trace.per_unit_means.data.end(), means.begin(), means.end());
}

std::vector<double> trace_summary(const ActivationTrace& trace) {
    std::vector<double> out;
    std::vector<double> row(trace.per_unit_medians.cols);
    for (std::size_t e = 0; e < trace.per_unit_medians.rows; ++e) {
        std::copy_n(trace.per_unit_medians.row(e), row.size(), row.begin());
        out.push_back(median_inplace(row));
    }
    return out;
}

MedianVarianceSummary median_variance(const ActivationTrace& trace) {
    const std::size_t n_epochs = trace.per_unit_medians.rows;
    if (n_epochs < 2)
        throw ConfigError("median_variance: needs at least 2 recorded epochs, have " +
                          std::to_string(n_epochs));
    MedianVarianceSummary summary;
    std::vector<double> series(n_epochs), diffs(n_epochs - 1);
    for (std::size_t h = 0; h + 1 < trace.layer_offsets.size(); ++h) {
        LayerVariances lv;
        lv.layer = h + 1;
        for (std::size_t u = trace.layer_offsets[h]; u < trace.layer_offsets[h + 1]; ++u) {
            for (std::size_t e = 0; e < n_epochs; ++e) series[e] = trace.per_unit_medians(e, u);
            for (std::size_t e = 0; e + 1 < n_epochs; ++e) diffs[e] = series[e + 1] - series[e];
            lv.variance_of_medians.push_back(sample_variance(series.data(), n_epochs));
            lv.variance_of_first_differences.push_back(sample_variance(diffs.data(), diffs.size()));
        }
        summary.per_layer.push_back(std::move(lv));
    }
    return summary;
}

double reconstruction_error(const Network& net, const Dataset& data) {
    if (net.output_dim() != data.dim())
        throw ShapeError("reconstruction_error: output dim " + std::to_string(net.output_dim()) +
                         " vs data dim " + std::to_string(data.dim()));
    if (data.size() == 0) throw ConfigError("reconstruction_error: data set is empty");
    // chunked so wide autoencoders do not hold every layer for the full set
    constexpr std::size_t kChunk = 1024;
    double ss = 0.0;
    for (std::size_t from = 0; from < data.size(); from += kChunk) {
        const std::size_t n = std::min(kChunk, data.size() - from);
        Matrix chunk(n, data.dim());
        std::copy_n(data.inputs.row(from), n * data.dim(), chunk.data.begin());
        ForwardTrace trace = forward(net, chunk);
        const Matrix& out = trace.output();
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            const double d = out.data[i] - chunk.data[i];
            ss += d * d;
        }
    }
    return ss / (double(data.size()) * double(data.dim()));
}

void write_trace_csv(const ActivationTrace& trace, const std::string& path) {
    std::string out = "epoch";
    for (std::size_t h = 0; h + 1 < trace.layer_offsets.size(); ++h)
        for (std::size_t u = 0; u < trace.layer_offsets[h + 1] - trace.layer_offsets[h]; ++u)
            out += ",u" + std::to_string(h + 1) + "_" + std::to_string(u);
    out += '\n';
    for (std::size_t e = 0; e < trace.per_unit_medians.rows; ++e) {
        out += std::to_string(trace.epochs[e]);
        for (std::size_t u = 0; u < trace.per_unit_medians.cols; ++u)
            out += ',' + io::format_double(trace.per_unit_medians(e, u));
        out += '\n';
    }
    io::write_file_atomic(path, out);
}

void write_summary_csv(const ActivationTrace& trace, const std::string& path) {
    const std::vector<double> med = trace_summary(trace);
    std::string out = "epoch,median_of_medians,mean_of_means\n";
    for (std::size_t e = 0; e < med.size(); ++e) {
        double mean = 0.0;
        for (std::size_t u = 0; u < trace.per_unit_means.cols; ++u)
            mean += trace.per_unit_means(e, u);
        mean /= double(trace.per_unit_means.cols);
        out += std::to_string(trace.epochs[e]) + ',' + io::format_double(med[e]) + ',' +
               io::format_double(mean) + '\n';
    }
    io::write_file_atomic(path, out);
}

} // namespace elulab::diagnostics
