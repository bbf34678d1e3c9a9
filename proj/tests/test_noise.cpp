#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "ibm2/error.hpp"
#include "ibm2/noise.hpp"
#include "ibm2/rng.hpp"

using namespace ibm2;

namespace {

FeatureDataset two_point_dataset() {
    FeatureDataset ds;
    ds.d = 2;
    ds.class_count = 2;
    ds.labels = {0, 1};
    ds.features = {0.0, 0.0, 2.0, 2.0};
    return ds;
}

FeatureDataset random_dataset(std::uint64_t seed, std::size_t rows, std::size_t dim) {
    rng::Stream s(seed);
    FeatureDataset ds;
    ds.d = dim;
    ds.class_count = 3;
    ds.features.resize(rows * dim);
    s.fill_normal(ds.features);
    for (std::size_t i = 0; i < rows; ++i) {
        ds.labels.push_back(static_cast<std::uint32_t>(s.below(3)));
    }
    return ds;
}

} // namespace

TEST_CASE("range vector: two-point sample std") {
    // columns {0,2}: mean 1, Bessel variance 2 -> std sqrt(2)
    const RangeVector r = compute_range_vector(two_point_dataset(), SamplingMode::ellipsoidal);
    REQUIRE(r.scale.size() == 2);
    CHECK(r.scale[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(r.scale[1] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK_FALSE(r.degenerate_fallback);
}

TEST_CASE("range vector: identical rows fall back to all-ones") {
    FeatureDataset ds;
    ds.d = 3;
    ds.class_count = 1;
    ds.labels = {0, 0, 0};
    ds.features = {1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0, 2.0, 3.0};
    const RangeVector r = compute_range_vector(ds, SamplingMode::ellipsoidal);
    CHECK(r.degenerate_fallback);
    for (double s : r.scale) CHECK(s == 1.0);

    // Single row behaves the same.
    FeatureDataset one;
    one.d = 2;
    one.class_count = 1;
    one.labels = {0};
    one.features = {5.0, -1.0};
    const RangeVector r1 = compute_range_vector(one, SamplingMode::ellipsoidal);
    CHECK(r1.degenerate_fallback);
}

TEST_CASE("range vector: spherical is all-ones") {
    const RangeVector r = compute_range_vector(two_point_dataset(), SamplingMode::spherical);
    for (double s : r.scale) CHECK(s == 1.0);
    CHECK(r.mode == SamplingMode::spherical);
}

TEST_CASE("range vector matches a naive two-pass oracle on 100x16") {
    const FeatureDataset ds = random_dataset(71, 100, 16);
    const RangeVector r = compute_range_vector(ds, SamplingMode::ellipsoidal);
    for (std::size_t j = 0; j < ds.d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < ds.rows(); ++i) mean += ds.features[i * ds.d + j];
        mean /= static_cast<double>(ds.rows());
        double sq = 0.0;
        for (std::size_t i = 0; i < ds.rows(); ++i) {
            const double diff = ds.features[i * ds.d + j] - mean;
            sq += diff * diff;
        }
        const double expected = std::sqrt(sq / static_cast<double>(ds.rows() - 1));
        CHECK(std::abs(r.scale[j] - expected) < 1e-10);
    }
}

TEST_CASE("noise vector is deterministic in (seed, i, r)") {
    const auto a = noise_vector(9, 3, 5, 16);
    const auto b = noise_vector(9, 3, 5, 16);
    CHECK(a == b);
    CHECK(noise_vector(9, 3, 6, 16) != a);
    CHECK(noise_vector(10, 3, 5, 16) != a);
}

TEST_CASE("noise vector moments over 1e5 draws") {
    const std::size_t dim = 8;
    const std::size_t draws = 100000 / dim;
    std::vector<double> sum(dim, 0.0), sum_sq(dim, 0.0);
    for (std::size_t i = 0; i < draws; ++i) {
        const auto v = noise_vector(1234, i, 0, dim);
        for (std::size_t j = 0; j < dim; ++j) {
            sum[j] += v[j];
            sum_sq[j] += v[j] * v[j];
        }
    }
    for (std::size_t j = 0; j < dim; ++j) {
        const double mean = sum[j] / static_cast<double>(draws);
        const double var = sum_sq[j] / static_cast<double>(draws) - mean * mean;
        CHECK(std::abs(mean) < 0.02);
        CHECK(var > 0.98);
        CHECK(var < 1.02);
    }
}

TEST_CASE("streams for adjacent replicas are uncorrelated") {
    const std::size_t n = 10000;
    const std::vector<double> a = noise_vector(77, 0, 0, n);
    const std::vector<double> b = noise_vector(77, 0, 1, n);
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    const double corr = cov / std::sqrt(va * vb);
    CHECK(std::abs(corr) < 0.03);
}

TEST_CASE("virtual example arithmetic") {
    SUBCASE("compose: z=(1,0), eps=0.5, s=(1,1), delta=(0,1) -> (1.0, 0.5)") {
        const std::vector<double> z = {1.0, 0.0};
        const std::vector<double> s = {1.0, 1.0};
        const std::vector<double> delta = {0.0, 1.0};
        std::vector<double> out(2);
        compose_virtual(z, 0.5, s, delta, out);
        CHECK(out == std::vector<double>({1.0, 0.5}));
    }

    FeatureDataset parent = two_point_dataset();
    VirtualSetSpec spec;
    spec.parent = &parent;
    spec.replicas = 4;
    spec.range = compute_range_vector(parent, SamplingMode::spherical);
    spec.seed = 3;

    SUBCASE("eps = 0 reproduces the parent exactly") {
        spec.eps = 0.0;
        for (std::size_t i = 0; i < 2; ++i) {
            for (std::size_t r = 0; r < 4; ++r) {
                const auto [v, y] = virtual_example(spec, i, r);
                CHECK(v == std::vector<double>(parent.row(i).begin(), parent.row(i).end()));
                CHECK(y == parent.labels[i]);
            }
        }
    }
    SUBCASE("out-of-bounds indices are rejected") {
        spec.eps = 0.1;
        CHECK_THROWS_AS(virtual_example(spec, 2, 0), Error);
        CHECK_THROWS_AS(virtual_example(spec, 0, 4), Error);
    }
    SUBCASE("radial scaling: doubling eps doubles the offset") {
        VirtualSetSpec half = spec;
        half.eps = 0.37;
        VirtualSetSpec full = spec;
        full.eps = 0.74;
        for (std::size_t i = 0; i < 2; ++i) {
            for (std::size_t r = 0; r < 4; ++r) {
                const auto [vh, yh] = virtual_example(half, i, r);
                const auto [vf, yf] = virtual_example(full, i, r);
                for (std::size_t j = 0; j < parent.d; ++j) {
                    const double off_h = vh[j] - parent.row(i)[j];
                    const double off_f = vf[j] - parent.row(i)[j];
                    CHECK(std::abs(off_f - 2.0 * off_h) < 1e-12);
                }
            }
        }
    }
}

TEST_CASE("virtual source: labels, cardinality, determinism") {
    FeatureDataset parent = random_dataset(15, 6, 5);
    VirtualSetSpec spec;
    spec.parent = &parent;
    spec.eps = 0.25;
    spec.replicas = 3;
    spec.range = compute_range_vector(parent, SamplingMode::ellipsoidal);
    spec.seed = 99;
    VirtualSource source(spec);

    CHECK(source.size() == 18);
    std::vector<double> row(parent.d), again(parent.d);
    for (std::size_t idx = 0; idx < source.size(); ++idx) {
        CHECK(source.label(idx) == parent.labels[idx / 3]);
        source.fill(idx, row);
        source.fill(idx, again);
        CHECK(row == again);
        const auto [direct, y] = virtual_example(spec, idx / 3, idx % 3);
        CHECK(row == direct);
        CHECK(y == source.label(idx));
    }
}

TEST_CASE("annulus statistics") {
    SUBCASE("spherical d=2048: thin shell at sqrt(d)") {
        FeatureDataset parent;
        parent.d = 2048;
        parent.class_count = 1;
        parent.labels = {0};
        parent.features.assign(2048, 0.1);
        VirtualSetSpec spec;
        spec.parent = &parent;
        spec.eps = 1.0;
        spec.replicas = 1000;
        spec.range = compute_range_vector(parent, SamplingMode::spherical);
        spec.seed = 5;
        const AnnulusStats stats = annulus_stats(spec, 1000);
        const double expected = std::sqrt(2048.0);
        CHECK(std::abs(stats.mean_radius - expected) / expected < 0.01);
        CHECK(stats.std_radius / expected < 0.05);
    }
    SUBCASE("ellipsoidal mean squared radius tracks eps^2 * ||s||^2") {
        FeatureDataset parent = random_dataset(31, 50, 32);
        VirtualSetSpec spec;
        spec.parent = &parent;
        spec.eps = 0.8;
        spec.replicas = 400;
        spec.range = compute_range_vector(parent, SamplingMode::ellipsoidal);
        spec.seed = 8;
        const AnnulusStats stats = annulus_stats(spec, 20000);
        double s_sq = 0.0;
        for (double s : spec.range.scale) s_sq += s * s;
        const double expected_sq = spec.eps * spec.eps * s_sq;
        const double mean_sq = stats.mean_radius * stats.mean_radius + stats.std_radius * stats.std_radius;
        CHECK(std::abs(mean_sq - expected_sq) / expected_sq < 0.05);
    }
    SUBCASE("eps = 0 collapses to zero radius") {
        FeatureDataset parent = two_point_dataset();
        VirtualSetSpec spec;
        spec.parent = &parent;
        spec.eps = 0.0;
        spec.replicas = 10;
        spec.range = compute_range_vector(parent, SamplingMode::spherical);
        spec.seed = 2;
        const AnnulusStats stats = annulus_stats(spec, 100);
        CHECK(stats.mean_radius == 0.0);
        CHECK(stats.std_radius == 0.0);
    }
}
