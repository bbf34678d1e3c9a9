#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ibm2 {

// A fixed table of d-dimensional feature vectors with integer class labels.
// Immutable by convention once built: every stage takes a const reference and
// returns a new dataset instead of mutating. Values are held as float64; the
// on-disk format narrows to float32 (matching common embedding dumps).
struct FeatureDataset {
    std::vector<double> features;        // row-major, rows() x d
    std::vector<std::uint32_t> labels;   // size rows()
    std::size_t d = 0;
    std::uint32_t class_count = 0;
    std::vector<std::string> class_names; // empty, or exactly class_count entries
    bool normalized = false;

    std::size_t rows() const { return labels.size(); }
    std::span<const double> row(std::size_t i) const { return {features.data() + i * d, d}; }

    // Enforces the structural invariants (shapes, label range, unit norms
    // when the normalized flag is set). Throws Error on violation.
    void validate() const;
};

// --- On-disk formats -------------------------------------------------------
//
// Binary feature file, little-endian:
//   magic "IBM2FEAT" (8 bytes)
//   version  u32 = 1
//   flags    u32   (bit 0: normalized)
//   d        u32
//   C        u32
//   M        u64
//   M records of { label u32, d x float32 }
//   class-name table: count u32 (0 or C), then per name { len u32, bytes }
//
// CSV rows are `label,f1,...,fd` with no header; arity is inferred from the
// first line.

FeatureDataset load_feature_file(const std::filesystem::path& path);
void write_feature_file(const FeatureDataset& dataset, const std::filesystem::path& path);

FeatureDataset import_csv(const std::filesystem::path& path);
void write_csv(const FeatureDataset& dataset, const std::filesystem::path& path);

// Returns a copy with every row scaled to unit Euclidean norm and the
// normalized flag set. A zero-norm row is a hard error naming the row index.
FeatureDataset l2_normalize(const FeatureDataset& dataset);

// --- Synthetic Gaussian-mixture oracle --------------------------------------

struct MixtureSpec {
    std::size_t d = 0;
    std::uint32_t class_count = 0;
    std::vector<std::vector<double>> means; // class_count x d
    std::vector<double> stds;               // d, shared across classes
    int train_per_class = 1;
    int test_per_class = 50;
    std::uint64_t seed = 0;

    void validate() const;
};

// Draws class c as mean_c + stds (.) standard normal, grouped by class.
// Bit-reproducible for a given spec.
std::pair<FeatureDataset, FeatureDataset> synth_mixture(const MixtureSpec& spec);

// Named desk-scale presets ("iso-easy", "iso", "aniso"). Class means and the
// per-dimension std profile are derived deterministically from the seed.
MixtureSpec mixture_preset(const std::string& name, std::uint64_t seed,
                           int train_per_class, int test_per_class);

} // namespace ibm2
