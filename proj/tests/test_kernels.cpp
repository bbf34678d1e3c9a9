#include <doctest.h>

#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ibm2/kernels.hpp"
#include "ibm2/rng.hpp"

using namespace ibm2;

namespace {

struct Problem {
    std::size_t rows, class_count, dim;
    std::vector<double> weights, bias, features;
    std::vector<std::uint32_t> labels;
};

Problem random_problem(std::uint64_t seed, std::size_t rows, std::size_t class_count,
                       std::size_t dim) {
    Problem p{rows, class_count, dim, {}, {}, {}, {}};
    rng::Stream s(seed);
    p.weights.resize(class_count * dim);
    p.bias.resize(class_count);
    p.features.resize(rows * dim);
    s.fill_normal(p.weights);
    s.fill_normal(p.bias);
    s.fill_normal(p.features);
    p.labels.resize(rows);
    for (auto& y : p.labels) y = static_cast<std::uint32_t>(s.below(class_count));
    return p;
}

template <typename F>
void with_threads(F&& body) {
#ifdef _OPENMP
    const int saved = omp_get_max_threads();
    for (int t : {1, 2, 4}) {
        omp_set_num_threads(t);
        body();
    }
    omp_set_num_threads(saved);
#else
    body();
#endif
}

} // namespace

TEST_CASE("parallel kernels are bit-identical to the serial references") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        const Problem p = random_problem(seed, 517, 7, 33);

        std::vector<double> logits_ref(p.rows * p.class_count);
        kernels::batch_logits_serial(p.weights, p.bias, p.class_count, p.dim, p.features, p.rows,
                                     logits_ref);

        std::vector<double> coef_ref = logits_ref;
        std::vector<double> loss_ref(p.rows);
        kernels::softmax_ce_coef_serial(coef_ref, p.labels, p.class_count, 0.1, 1.0 / p.rows,
                                        loss_ref);

        std::vector<double> wgrad_ref(p.class_count * p.dim), bgrad_ref(p.class_count);
        kernels::accumulate_grad_serial(coef_ref, p.features, p.rows, p.class_count, p.dim,
                                        wgrad_ref, bgrad_ref);

        const std::size_t correct_ref = kernels::count_correct_serial(
            p.weights, p.bias, p.class_count, p.dim, p.features, p.labels);

        std::vector<double> std_ref(p.dim);
        kernels::column_stddev_serial(p.features, p.rows, p.dim, std_ref);

        std::vector<double> norm_ref = p.features;
        const std::size_t bad_ref = kernels::normalize_rows_serial(norm_ref, p.rows, p.dim);

        with_threads([&] {
            std::vector<double> logits(p.rows * p.class_count);
            kernels::batch_logits(p.weights, p.bias, p.class_count, p.dim, p.features, p.rows,
                                  logits);
            CHECK(logits == logits_ref);

            std::vector<double> coef = logits_ref;
            std::vector<double> loss(p.rows);
            kernels::softmax_ce_coef(coef, p.labels, p.class_count, 0.1, 1.0 / p.rows, loss);
            CHECK(coef == coef_ref);
            CHECK(loss == loss_ref);

            std::vector<double> wgrad(p.class_count * p.dim), bgrad(p.class_count);
            kernels::accumulate_grad(coef_ref, p.features, p.rows, p.class_count, p.dim, wgrad,
                                     bgrad);
            CHECK(wgrad == wgrad_ref);
            CHECK(bgrad == bgrad_ref);

            CHECK(kernels::count_correct(p.weights, p.bias, p.class_count, p.dim, p.features,
                                         p.labels) == correct_ref);

            std::vector<double> stddev(p.dim);
            kernels::column_stddev(p.features, p.rows, p.dim, stddev);
            CHECK(stddev == std_ref);

            std::vector<double> norm = p.features;
            CHECK(kernels::normalize_rows(norm, p.rows, p.dim) == bad_ref);
            CHECK(norm == norm_ref);
        });
    }
}

TEST_CASE("normalize_rows reports the first zero row") {
    std::vector<double> data = {1.0, 2.0, 0.0, 0.0, 3.0, 4.0, 0.0, 0.0};
    std::vector<double> copy = data;
    CHECK(kernels::normalize_rows_serial(copy, 4, 2) == 1);
    with_threads([&] {
        std::vector<double> buf = data;
        CHECK(kernels::normalize_rows(buf, 4, 2) == 1);
    });
}

TEST_CASE("softmax rows form a probability simplex") {
    const Problem p = random_problem(11, 64, 9, 5);
    std::vector<double> logits(p.rows * p.class_count);
    kernels::batch_logits_serial(p.weights, p.bias, p.class_count, p.dim, p.features, p.rows,
                                 logits);
    kernels::softmax_rows(logits, p.rows, p.class_count);
    for (std::size_t m = 0; m < p.rows; ++m) {
        double sum = 0.0;
        for (std::size_t c = 0; c < p.class_count; ++c) {
            const double v = logits[m * p.class_count + c];
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}
