#include "ibm2/margin_search.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ibm2/error.hpp"
#include "ibm2/rng.hpp"

namespace ibm2 {

void SearchConfig::validate() const {
    if (!(t_init > 0.0 && t_init <= 1.0)) {
        throw Error(ErrorCode::invalid_config, "threshold must be in (0, 1]");
    }
    if (!(tol > 0.0) || !std::isfinite(tol)) {
        throw Error(ErrorCode::invalid_config, "tol must be > 0");
    }
    if (!(right_init > tol) || !std::isfinite(right_init)) {
        throw Error(ErrorCode::invalid_config, "right_init must exceed tol");
    }
    if (replicas < 1) throw Error(ErrorCode::invalid_config, "replicas must be >= 1");
    if (epochs < 1) throw Error(ErrorCode::invalid_config, "search epochs must be >= 1");
    if (lr < 0.0) throw Error(ErrorCode::invalid_config, "search lr must be >= 0");
}

double compute_threshold(double t_init, double baseline_train_acc) {
    if (t_init < 0.0 || t_init > 1.0 || baseline_train_acc < 0.0 || baseline_train_acc > 1.0) {
        throw Error(ErrorCode::invalid_spec, "threshold inputs must be in [0, 1]");
    }
    return std::min(t_init, baseline_train_acc);
}

double train_and_eval(LinearHead& head, const FeatureDataset& dataset, double eps,
                      const RangeVector& range, int replicas, const TrainConfig& trainer,
                      std::uint64_t noise_seed) {
    VirtualSetSpec spec;
    spec.parent = &dataset;
    spec.eps = eps;
    spec.replicas = replicas;
    spec.range = range;
    spec.seed = noise_seed;
    VirtualSource source(spec);
    return train_from(head, source, trainer);
}

SearchTrace search_epsilon(const FeatureDataset& dataset, const RangeVector& range,
                           const SearchConfig& search, const TrainConfig& trainer) {
    search.validate();
    trainer.validate();
    dataset.validate();

    SearchTrace trace;
    trace.threshold = search.t_init;

    const LinearHead initial = init_head(dataset.d, dataset.class_count, trainer.seed);
    LinearHead warm = initial;

    double left = 0.0;
    double right = search.right_init;
    double eps = right / 2.0;
    std::size_t step = 0;

    while (true) {
        const std::uint64_t noise_seed =
            search.resample_per_step ? rng::mix64(search.seed, step) : search.seed;

        double acc = 0.0;
        if (search.warm_start) {
            acc = train_and_eval(warm, dataset, eps, range, search.replicas, trainer, noise_seed);
        } else {
            LinearHead fresh = initial;
            acc = train_and_eval(fresh, dataset, eps, range, search.replicas, trainer, noise_seed);
        }
        trace.steps.push_back({left, right, eps, acc});

        if (acc > search.t_init) {
            left = eps; // radius fits, push outward
        } else {
            right = eps;
        }
        eps = (left + right) / 2.0;
        ++step;
        if (right - left < search.tol) break;
    }

    trace.eps_hat = eps;
    return trace;
}

} // namespace ibm2
