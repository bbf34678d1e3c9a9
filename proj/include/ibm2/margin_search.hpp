#pragma once

#include <cstdint>
#include <vector>

#include "ibm2/linear_trainer.hpp"
#include "ibm2/noise.hpp"

namespace ibm2 {

struct SearchConfig {
    double t_init = 0.9;       // accuracy threshold before clamping
    double right_init = 10.0;  // upper end of the search interval
    double tol = 0.05;         // stop when right - left < tol
    int replicas = 200;        // R
    int epochs = 20;           // per-step training epochs
    double lr = 1.0;           // per-step training LR
    bool warm_start = true;    // reuse the classifier across steps
    bool resample_per_step = false; // fresh noise directions at every step
    std::uint64_t seed = 0;    // noise stream seed

    void validate() const;
};

struct SearchStep {
    double left = 0.0;   // interval entering the step
    double right = 0.0;
    double eps = 0.0;    // midpoint trained this step
    double virtual_train_accuracy = 0.0;
};

struct SearchTrace {
    std::vector<SearchStep> steps;
    double eps_hat = 0.0;
    double threshold = 0.0; // T actually used (post-clamp)
};

// T = min(T_init, ACC_up): the threshold can never exceed what a probe
// reaches on the original set.
double compute_threshold(double t_init, double baseline_train_acc);

// Trains `head` further on the virtual set D^eps (mutating it) and returns
// the trained head's accuracy on that same virtual set.
double train_and_eval(LinearHead& head, const FeatureDataset& dataset, double eps,
                      const RangeVector& range, int replicas, const TrainConfig& trainer,
                      std::uint64_t noise_seed);

// Bisection for the largest eps whose virtual set is still classified at
// accuracy > T. left = 0, right = right_init, eps = right / 2; each step
// trains at eps, moves left up on acc > T (otherwise right down), re-midpoints,
// and stops once right - left < tol. The classifier is initialized once before
// the loop; warm_start reuses it across steps, otherwise each step trains a
// fresh copy of that initialization.
SearchTrace search_epsilon(const FeatureDataset& dataset, const RangeVector& range,
                           const SearchConfig& search, const TrainConfig& trainer);

} // namespace ibm2
