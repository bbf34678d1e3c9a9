#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ibm2 {

// Reliability statistics of an episodic evaluation. All reductions run over
// the ascending-sorted copy of the input, which makes every field an exact
// function of the accuracy multiset (permutation of the input cannot change
// even the last bit).
struct EpisodeReport {
    std::vector<double> acc_sorted; // ascending
    double acc_mean = 0.0;
    double acc_std = 0.0;   // sample std, divisor n-1 (0 when n == 1)
    double acc_worst1 = 0.0;
    double acc_worst10 = 0.0;   // mean of the min(10, n) smallest
    double acc_worst100 = 0.0;  // mean of the min(100, n) smallest
    double ci95 = 0.0;          // 1.96 * acc_std / sqrt(n)
    std::size_t n = 0;
};

EpisodeReport episode_metrics(std::span<const double> accuracies);

// sigma = z95 * sqrt(n) / 1.96 and its inverse. The 0.51 coefficient quoted
// for episodic FSL confidence intervals is 1/1.96.
double sigma_from_ci(double z95, std::size_t n);
double ci_from_sigma(double sigma, std::size_t n);

// Per-class recall. Classes with no test samples come back as nullopt rather
// than 0, so downstream aggregation can tell "never tested" from "all wrong".
std::vector<std::optional<double>> per_class_accuracy(std::span<const std::uint32_t> predictions,
                                                      std::span<const std::uint32_t> labels,
                                                      std::uint32_t class_count);

// Sorts classes by baseline accuracy ascending (ties by class id), rearranges
// the per-class gains (method - baseline) in that order, splits them into
// `bins` contiguous groups — floor(C/bins) each, the remainder spread one per
// bin from the first — and returns the per-bin mean gain.
std::vector<double> gain_histogram(std::span<const double> baseline_acc,
                                   std::span<const double> method_acc,
                                   std::size_t bins = 10);

} // namespace ibm2
