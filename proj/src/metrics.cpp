#include "ibm2/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ibm2/error.hpp"

namespace ibm2 {

namespace {

double mean_of_prefix(const std::vector<double>& sorted, std::size_t count) {
    double sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) sum += sorted[i];
    return sum / static_cast<double>(count);
}

} // namespace

EpisodeReport episode_metrics(std::span<const double> accuracies) {
    if (accuracies.empty()) throw Error(ErrorCode::empty_input, "episode_metrics needs at least one accuracy");

    EpisodeReport report;
    report.n = accuracies.size();
    report.acc_sorted.assign(accuracies.begin(), accuracies.end());
    std::sort(report.acc_sorted.begin(), report.acc_sorted.end());

    // A constant list has zero spread by definition; don't let summation
    // round-off say otherwise.
    if (report.acc_sorted.front() == report.acc_sorted.back()) {
        const double value = report.acc_sorted.front();
        report.acc_mean = value;
        report.acc_worst1 = value;
        report.acc_worst10 = value;
        report.acc_worst100 = value;
        return report;
    }

    const auto n = static_cast<double>(report.n);
    report.acc_mean = mean_of_prefix(report.acc_sorted, report.n);

    double sq = 0.0;
    for (double a : report.acc_sorted) {
        const double diff = a - report.acc_mean;
        sq += diff * diff;
    }
    report.acc_std = report.n > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;

    report.acc_worst1 = report.acc_sorted.front();
    report.acc_worst10 = mean_of_prefix(report.acc_sorted, std::min<std::size_t>(10, report.n));
    report.acc_worst100 = mean_of_prefix(report.acc_sorted, std::min<std::size_t>(100, report.n));
    report.ci95 = ci_from_sigma(report.acc_std, report.n);
    return report;
}

double sigma_from_ci(double z95, std::size_t n) {
    return z95 * std::sqrt(static_cast<double>(n)) / 1.96;
}

double ci_from_sigma(double sigma, std::size_t n) {
    return 1.96 * sigma / std::sqrt(static_cast<double>(n));
}

std::vector<std::optional<double>> per_class_accuracy(std::span<const std::uint32_t> predictions,
                                                      std::span<const std::uint32_t> labels,
                                                      std::uint32_t class_count) {
    if (predictions.size() != labels.size()) {
        throw Error(ErrorCode::dimension_mismatch,
                    "predictions/labels length mismatch: " + std::to_string(predictions.size()) +
                        " vs " + std::to_string(labels.size()));
    }
    std::vector<std::size_t> total(class_count, 0);
    std::vector<std::size_t> correct(class_count, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= class_count) {
            throw Error(ErrorCode::label_out_of_range,
                        "label " + std::to_string(labels[i]) + " at row " + std::to_string(i));
        }
        ++total[labels[i]];
        if (predictions[i] == labels[i]) ++correct[labels[i]];
    }
    std::vector<std::optional<double>> acc(class_count);
    for (std::uint32_t c = 0; c < class_count; ++c) {
        if (total[c] > 0) {
            acc[c] = static_cast<double>(correct[c]) / static_cast<double>(total[c]);
        }
    }
    return acc;
}

std::vector<double> gain_histogram(std::span<const double> baseline_acc,
                                   std::span<const double> method_acc,
                                   std::size_t bins) {
    if (baseline_acc.size() != method_acc.size()) {
        throw Error(ErrorCode::dimension_mismatch, "baseline/method per-class vectors differ in length");
    }
    const std::size_t class_count = baseline_acc.size();
    if (class_count < bins) {
        throw Error(ErrorCode::invalid_spec,
                    "need at least as many classes as bins: " + std::to_string(class_count) + " < " +
                        std::to_string(bins));
    }

    std::vector<std::size_t> order(class_count);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (baseline_acc[a] != baseline_acc[b]) return baseline_acc[a] < baseline_acc[b];
        return a < b;
    });

    const std::size_t base = class_count / bins;
    const std::size_t remainder = class_count % bins;
    std::vector<double> bin_means(bins, 0.0);
    std::size_t pos = 0;
    for (std::size_t bin = 0; bin < bins; ++bin) {
        const std::size_t size = base + (bin < remainder ? 1 : 0);
        double sum = 0.0;
        for (std::size_t i = 0; i < size; ++i, ++pos) {
            const std::size_t cls = order[pos];
            sum += method_acc[cls] - baseline_acc[cls];
        }
        bin_means[bin] = sum / static_cast<double>(size);
    }
    return bin_means;
}

} // namespace ibm2
