#include "ibm2/noise.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ibm2/error.hpp"
#include "ibm2/kernels.hpp"
#include "ibm2/rng.hpp"

namespace ibm2 {

const char* sampling_mode_name(SamplingMode mode) {
    return mode == SamplingMode::spherical ? "spherical" : "ellipsoidal";
}

SamplingMode sampling_mode_from_name(const std::string& name) {
    if (name == "spherical") return SamplingMode::spherical;
    if (name == "ellipsoidal") return SamplingMode::ellipsoidal;
    throw Error(ErrorCode::invalid_config, "unknown sampling mode '" + name + "'");
}

RangeVector compute_range_vector(const FeatureDataset& dataset, SamplingMode mode) {
    if (dataset.rows() == 0) throw Error(ErrorCode::empty_input, "range vector needs a nonempty dataset");

    RangeVector range;
    range.mode = mode;
    if (mode == SamplingMode::spherical) {
        range.scale.assign(dataset.d, 1.0);
        return range;
    }

    range.scale.resize(dataset.d);
    kernels::column_stddev(dataset.features, dataset.rows(), dataset.d, range.scale);

    bool all_zero = true;
    for (double s : range.scale) {
        if (s != 0.0) {
            all_zero = false;
            break;
        }
    }
    if (dataset.rows() == 1 || all_zero) {
        range.scale.assign(dataset.d, 1.0);
        range.degenerate_fallback = true;
    }
    return range;
}

void VirtualSetSpec::validate() const {
    if (parent == nullptr) throw Error(ErrorCode::invalid_spec, "virtual set needs a parent dataset");
    if (eps < 0.0 || !std::isfinite(eps)) throw Error(ErrorCode::invalid_spec, "eps must be finite and >= 0");
    if (replicas < 1) throw Error(ErrorCode::invalid_spec, "replicas must be >= 1");
    if (range.scale.size() != parent->d) {
        throw Error(ErrorCode::dimension_mismatch, "range vector length does not match parent dimensionality");
    }
}

std::vector<double> noise_vector(std::uint64_t seed, std::size_t instance_index,
                                 std::size_t replica_index, std::size_t dim) {
    std::vector<double> delta(dim);
    rng::Stream stream(rng::mix64(rng::mix64(seed, instance_index), replica_index));
    stream.fill_normal(delta);
    return delta;
}

void compose_virtual(std::span<const double> parent_row, double eps,
                     std::span<const double> scale, std::span<const double> delta,
                     std::span<double> out) {
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = parent_row[j] + eps * (scale[j] * delta[j]);
    }
}

std::pair<std::vector<double>, std::uint32_t> virtual_example(const VirtualSetSpec& spec,
                                                              std::size_t instance_index,
                                                              std::size_t replica_index) {
    spec.validate();
    if (instance_index >= spec.parent->rows() || replica_index >= static_cast<std::size_t>(spec.replicas)) {
        throw Error(ErrorCode::index_out_of_bounds,
                    "(" + std::to_string(instance_index) + ", " + std::to_string(replica_index) +
                        ") outside " + std::to_string(spec.parent->rows()) + " x " +
                        std::to_string(spec.replicas));
    }
    std::vector<double> out(spec.parent->d);
    const std::vector<double> delta = noise_vector(spec.seed, instance_index, replica_index, spec.parent->d);
    compose_virtual(spec.parent->row(instance_index), spec.eps, spec.range.scale, delta, out);
    return {std::move(out), spec.parent->labels[instance_index]};
}

AnnulusStats annulus_stats(const VirtualSetSpec& spec, std::size_t sample_count) {
    spec.validate();
    if (sample_count == 0) throw Error(ErrorCode::invalid_spec, "sample_count must be >= 1");

    const std::size_t total = spec.size();
    const std::size_t dim = spec.parent->d;
    std::vector<double> delta(dim);

    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t n = 0; n < sample_count; ++n) {
        const std::size_t flat = n % total;
        const std::size_t i = flat / static_cast<std::size_t>(spec.replicas);
        const std::size_t r = flat % static_cast<std::size_t>(spec.replicas);
        rng::Stream stream(rng::mix64(rng::mix64(spec.seed, i), r));
        stream.fill_normal(delta);
        double sq = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double offset = spec.eps * (spec.range.scale[j] * delta[j]);
            sq += offset * offset;
        }
        const double radius = std::sqrt(sq);
        sum += radius;
        sum_sq += radius * radius;
    }

    AnnulusStats stats;
    const double n = static_cast<double>(sample_count);
    stats.mean_radius = sum / n;
    const double var = sum_sq / n - stats.mean_radius * stats.mean_radius;
    stats.std_radius = var > 0.0 ? std::sqrt(var) : 0.0;
    return stats;
}

void DatasetSource::fill(std::size_t index, std::span<double> out) const {
    const std::span<const double> row = dataset_->row(index);
    std::copy(row.begin(), row.end(), out.begin());
}

VirtualSource::VirtualSource(const VirtualSetSpec& spec) : spec_(spec) {
    spec_.validate();
}

void VirtualSource::fill(std::size_t index, std::span<double> out) const {
    const std::size_t replicas = static_cast<std::size_t>(spec_.replicas);
    const std::size_t i = index / replicas;
    const std::size_t r = index % replicas;
    rng::Stream stream(rng::mix64(rng::mix64(spec_.seed, i), r));
    // Delta straight into `out`, then composed in place; no temporary.
    stream.fill_normal(out);
    compose_virtual(spec_.parent->row(i), spec_.eps, spec_.range.scale, out, out);
}

} // namespace ibm2
