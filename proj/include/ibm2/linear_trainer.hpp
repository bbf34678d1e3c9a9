#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ibm2/feature_store.hpp"
#include "ibm2/noise.hpp"

namespace ibm2 {

// C-way affine probe: logits = W x + b.
struct LinearHead {
    std::vector<double> weights; // class_count x d, row-major
    std::vector<double> bias;    // class_count
    std::size_t d = 0;
    std::uint32_t class_count = 0;
};

struct HeadGradient {
    std::vector<double> weights;
    std::vector<double> bias;
};

struct TrainConfig {
    double init_lr = 1.0;
    std::size_t batch_size = 256;
    int epochs = 100;
    double label_smoothing = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    // Sources larger than this stay lazy and are regenerated per batch.
    std::size_t cache_limit_bytes = 256ull << 20;

    void validate() const;
};

// W ~ N(0, 0.01^2) elementwise, b = 0. Deterministic per seed.
LinearHead init_head(std::size_t d, std::uint32_t class_count, std::uint64_t seed);

std::vector<double> logits(const LinearHead& head, std::span<const double> x);

// softmax as a standalone utility (stabilized).
std::vector<double> softmax(std::span<const double> logits);

// -sum_j q_j log softmax(logits)_j with q = (1-a) onehot(label) + a/C.
double smoothed_ce(std::span<const double> logits, std::uint32_t label, double label_smoothing);

// Mean gradient over the batch: dW = (p - q) x^T, db = p - q, averaged.
HeadGradient grad_smoothed_ce(const LinearHead& head, std::span<const double> batch_features,
                              std::span<const std::uint32_t> batch_labels, double label_smoothing);

// init_lr * (1 + cos(pi * step / total_steps)) / 2
double cosine_lr(std::size_t step, std::size_t total_steps, double init_lr);

struct TrainResult {
    LinearHead head;
    double train_accuracy = 0.0;
};

// Adam + cosine schedule over epochs * ceil(size/batch) steps. The effective
// step size is cosine_lr(step) * batch_size / 256. Example order reshuffles
// each epoch from the seeded stream. Bit-deterministic for a given config and
// source, independent of the thread count.
TrainResult train(const ExampleSource& source, std::uint32_t class_count, const TrainConfig& config);

// Same loop, but continues from (and mutates) an existing head. Returns the
// final accuracy on the full source. Backbone of the warm-started search.
double train_from(LinearHead& head, const ExampleSource& source, const TrainConfig& config);

// Fraction of rows whose argmax logit equals the label; ties resolve to the
// lowest class index.
double evaluate(const LinearHead& head, const FeatureDataset& dataset);
double evaluate_source(const LinearHead& head, const ExampleSource& source);

// Per-row argmax predictions (for per-class accuracy analysis).
std::vector<std::uint32_t> predict(const LinearHead& head, const FeatureDataset& dataset);

// Head file: magic "IBM2HEAD", version u32 = 1, d u32, C u32, then W and b
// as little-endian float64.
void save_head(const LinearHead& head, const std::filesystem::path& path);
LinearHead load_head(const std::filesystem::path& path);

} // namespace ibm2
