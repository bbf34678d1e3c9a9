#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ibm2/feature_store.hpp"

namespace ibm2 {

enum class SamplingMode { spherical, ellipsoidal };

const char* sampling_mode_name(SamplingMode mode);
SamplingMode sampling_mode_from_name(const std::string& name);

// Per-dimension scale of the noise ellipsoid. Spherical mode is all-ones by
// definition; ellipsoidal mode is the label-agnostic per-column sample std.
struct RangeVector {
    std::vector<double> scale;
    SamplingMode mode = SamplingMode::spherical;
    bool degenerate_fallback = false; // set when M == 1 or every column std was 0
};

RangeVector compute_range_vector(const FeatureDataset& dataset, SamplingMode mode);

// Deterministic description of the M*R virtual examples around a parent set.
// Example (i, r) is parent row i plus eps * (scale (.) delta(i, r)); delta
// depends only on (seed, i, r), never on eps, so virtual sets at two radii
// share noise directions. Samples materialize lazily.
struct VirtualSetSpec {
    const FeatureDataset* parent = nullptr;
    double eps = 0.0;
    int replicas = 1; // R
    RangeVector range;
    std::uint64_t seed = 0;

    std::size_t size() const { return parent->rows() * static_cast<std::size_t>(replicas); }
    void validate() const;
};

// The standard-normal noise vector delta(i, r) for a given stream seed.
std::vector<double> noise_vector(std::uint64_t seed, std::size_t instance_index,
                                 std::size_t replica_index, std::size_t dim);

// out = z + eps * (scale (.) delta), the arithmetic core shared by every path.
void compose_virtual(std::span<const double> parent_row, double eps,
                     std::span<const double> scale, std::span<const double> delta,
                     std::span<double> out);

std::pair<std::vector<double>, std::uint32_t> virtual_example(const VirtualSetSpec& spec,
                                                              std::size_t instance_index,
                                                              std::size_t replica_index);

struct AnnulusStats {
    double mean_radius = 0.0;
    double std_radius = 0.0;
};

// Empirical mean/std of ||virtual - parent|| over the first sample_count
// (i, r) pairs in row-major order (wrapping if the spec is smaller).
AnnulusStats annulus_stats(const VirtualSetSpec& spec, std::size_t sample_count);

// --- Training data sources ---------------------------------------------------

// Read-only view of (vector, label) examples, addressable by index. fill() on
// distinct indices is safe from any thread.
class ExampleSource {
public:
    virtual ~ExampleSource() = default;
    virtual std::size_t size() const = 0;
    virtual std::size_t dim() const = 0;
    virtual std::uint32_t label(std::size_t index) const = 0;
    virtual void fill(std::size_t index, std::span<double> out) const = 0;
};

class DatasetSource final : public ExampleSource {
public:
    explicit DatasetSource(const FeatureDataset& dataset) : dataset_(&dataset) {}
    std::size_t size() const override { return dataset_->rows(); }
    std::size_t dim() const override { return dataset_->d; }
    std::uint32_t label(std::size_t index) const override { return dataset_->labels[index]; }
    void fill(std::size_t index, std::span<double> out) const override;

private:
    const FeatureDataset* dataset_;
};

// Lazy view of a virtual set: index i*R + r maps to example (i, r). Nothing
// is stored; each fill() regenerates from the counter stream.
class VirtualSource final : public ExampleSource {
public:
    explicit VirtualSource(const VirtualSetSpec& spec);
    std::size_t size() const override { return spec_.size(); }
    std::size_t dim() const override { return spec_.parent->d; }
    std::uint32_t label(std::size_t index) const override {
        return spec_.parent->labels[index / static_cast<std::size_t>(spec_.replicas)];
    }
    void fill(std::size_t index, std::span<double> out) const override;

    const VirtualSetSpec& spec() const { return spec_; }

private:
    VirtualSetSpec spec_;
};

} // namespace ibm2
