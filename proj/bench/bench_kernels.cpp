// Timing comparison of the OpenMP kernels against their serial references.
// Usage: ibm2_bench [rows] [classes] [dim] [reps]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "ibm2/kernels.hpp"
#include "ibm2/parallel.hpp"
#include "ibm2/rng.hpp"

using namespace ibm2;
using Clock = std::chrono::steady_clock;

namespace {

struct Inputs {
    std::size_t rows, class_count, dim;
    std::vector<double> weights, bias, features, coef;
    std::vector<std::uint32_t> labels;
};

Inputs make_inputs(std::size_t rows, std::size_t class_count, std::size_t dim) {
    Inputs in{rows, class_count, dim, {}, {}, {}, {}, {}};
    rng::Stream s(1);
    in.weights.resize(class_count * dim);
    in.bias.resize(class_count);
    in.features.resize(rows * dim);
    in.coef.resize(rows * class_count);
    s.fill_normal(in.weights);
    s.fill_normal(in.bias);
    s.fill_normal(in.features);
    s.fill_normal(in.coef);
    in.labels.resize(rows);
    for (auto& y : in.labels) y = static_cast<std::uint32_t>(s.below(class_count));
    return in;
}

template <typename F>
double time_ms(int reps, F&& fn) {
    fn(); // warm up
    const auto start = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count() / reps;
}

void row(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-18s %10.3f ms %10.3f ms %8.2fx\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms);
}

} // namespace

int main(int argc, char** argv) {
    const std::size_t rows = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 20000;
    const std::size_t classes = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 20;
    const std::size_t dim = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 64;
    const int reps = argc > 4 ? std::atoi(argv[4]) : 10;

    apply_thread_count(resolve_thread_count(0));
    std::printf("rows=%zu classes=%zu dim=%zu reps=%d threads=%d\n", rows, classes, dim, reps,
                current_max_threads());
    std::printf("%-18s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

    Inputs in = make_inputs(rows, classes, dim);
    std::vector<double> logits(rows * classes);
    std::vector<double> loss(rows);
    std::vector<double> wgrad(classes * dim), bgrad(classes);
    std::vector<double> stddev(dim);
    std::vector<double> norm(in.features.size());

    row("batch_logits",
        time_ms(reps, [&] {
            kernels::batch_logits_serial(in.weights, in.bias, classes, dim, in.features, rows, logits);
        }),
        time_ms(reps, [&] {
            kernels::batch_logits(in.weights, in.bias, classes, dim, in.features, rows, logits);
        }));

    row("softmax_ce_coef",
        time_ms(reps, [&] {
            std::vector<double> buf = logits;
            kernels::softmax_ce_coef_serial(buf, in.labels, classes, 0.1, 1.0 / rows, loss);
        }),
        time_ms(reps, [&] {
            std::vector<double> buf = logits;
            kernels::softmax_ce_coef(buf, in.labels, classes, 0.1, 1.0 / rows, loss);
        }));

    row("accumulate_grad",
        time_ms(reps, [&] {
            kernels::accumulate_grad_serial(in.coef, in.features, rows, classes, dim, wgrad, bgrad);
        }),
        time_ms(reps, [&] {
            kernels::accumulate_grad(in.coef, in.features, rows, classes, dim, wgrad, bgrad);
        }));

    row("count_correct",
        time_ms(reps, [&] {
            (void)kernels::count_correct_serial(in.weights, in.bias, classes, dim, in.features,
                                                in.labels);
        }),
        time_ms(reps, [&] {
            (void)kernels::count_correct(in.weights, in.bias, classes, dim, in.features, in.labels);
        }));

    row("column_stddev",
        time_ms(reps, [&] {
            kernels::column_stddev_serial(in.features, rows, dim, stddev);
        }),
        time_ms(reps, [&] { kernels::column_stddev(in.features, rows, dim, stddev); }));

    row("normalize_rows",
        time_ms(reps, [&] {
            norm = in.features;
            (void)kernels::normalize_rows_serial(norm, rows, dim);
        }),
        time_ms(reps, [&] {
            norm = in.features;
            (void)kernels::normalize_rows(norm, rows, dim);
        }));

    return 0;
}
