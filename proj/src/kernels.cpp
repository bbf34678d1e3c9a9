#include "ibm2/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ibm2::kernels {

namespace {

inline void row_logits(const double* weights, const double* bias, std::size_t class_count,
                       std::size_t dim, const double* x, double* out) {
    for (std::size_t c = 0; c < class_count; ++c) {
        const double* w = weights + c * dim;
        double acc = 0.0;
        for (std::size_t j = 0; j < dim; ++j) acc += w[j] * x[j];
        out[c] = acc + bias[c];
    }
}

inline void row_softmax(double* row, std::size_t class_count) {
    double hi = row[0];
    for (std::size_t c = 1; c < class_count; ++c) hi = std::max(hi, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < class_count; ++c) {
        row[c] = std::exp(row[c] - hi);
        sum += row[c];
    }
    const double inv = 1.0 / sum;
    for (std::size_t c = 0; c < class_count; ++c) row[c] *= inv;
}

inline std::size_t row_argmax(const double* row, std::size_t class_count) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < class_count; ++c) {
        if (row[c] > row[best]) best = c;
    }
    return best;
}

} // namespace

void batch_logits_serial(std::span<const double> weights, std::span<const double> bias,
                         std::size_t class_count, std::size_t dim,
                         std::span<const double> features, std::size_t rows,
                         std::span<double> logits_out) {
    for (std::size_t m = 0; m < rows; ++m) {
        row_logits(weights.data(), bias.data(), class_count, dim,
                   features.data() + m * dim, logits_out.data() + m * class_count);
    }
}

void batch_logits(std::span<const double> weights, std::span<const double> bias,
                  std::size_t class_count, std::size_t dim,
                  std::span<const double> features, std::size_t rows,
                  std::span<double> logits_out) {
    const double* w = weights.data();
    const double* b = bias.data();
    const double* x = features.data();
    double* out = logits_out.data();
#pragma omp parallel for schedule(static) if (rows >= 64)
    for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(rows); ++m) {
        row_logits(w, b, class_count, dim, x + m * dim, out + m * class_count);
    }
}

void softmax_rows_serial(std::span<double> logits, std::size_t rows, std::size_t class_count) {
    for (std::size_t m = 0; m < rows; ++m) row_softmax(logits.data() + m * class_count, class_count);
}

void softmax_rows(std::span<double> logits, std::size_t rows, std::size_t class_count) {
    double* p = logits.data();
#pragma omp parallel for schedule(static) if (rows >= 256)
    for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(rows); ++m) {
        row_softmax(p + m * class_count, class_count);
    }
}

namespace {

inline double row_ce_coef(double* row, std::size_t class_count, std::uint32_t label,
                          double label_smoothing, double inv_batch) {
    double hi = row[0];
    for (std::size_t c = 1; c < class_count; ++c) hi = std::max(hi, row[c]);
    double sum_exp = 0.0;
    double sum_logits = 0.0;
    for (std::size_t c = 0; c < class_count; ++c) {
        sum_exp += std::exp(row[c] - hi);
        sum_logits += row[c];
    }
    const double lse = hi + std::log(sum_exp);
    const double uniform = label_smoothing / static_cast<double>(class_count);
    const double loss = lse - (1.0 - label_smoothing) * row[label] - uniform * sum_logits;

    const double inv_sum = 1.0 / sum_exp;
    for (std::size_t c = 0; c < class_count; ++c) {
        const double p = std::exp(row[c] - hi) * inv_sum;
        const double q = uniform + (c == label ? 1.0 - label_smoothing : 0.0);
        row[c] = (p - q) * inv_batch;
    }
    return loss;
}

} // namespace

void softmax_ce_coef_serial(std::span<double> logits_inout, std::span<const std::uint32_t> labels,
                            std::size_t class_count, double label_smoothing, double inv_batch,
                            std::span<double> loss_out) {
    for (std::size_t m = 0; m < labels.size(); ++m) {
        loss_out[m] = row_ce_coef(logits_inout.data() + m * class_count, class_count, labels[m],
                                  label_smoothing, inv_batch);
    }
}

void softmax_ce_coef(std::span<double> logits_inout, std::span<const std::uint32_t> labels,
                     std::size_t class_count, double label_smoothing, double inv_batch,
                     std::span<double> loss_out) {
    double* p = logits_inout.data();
    const std::uint32_t* y = labels.data();
    double* loss = loss_out.data();
#pragma omp parallel for schedule(static) if (labels.size() >= 256)
    for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(labels.size()); ++m) {
        loss[m] = row_ce_coef(p + m * class_count, class_count, y[m], label_smoothing, inv_batch);
    }
}

void accumulate_grad_serial(std::span<const double> coef, std::span<const double> features,
                            std::size_t rows, std::size_t class_count, std::size_t dim,
                            std::span<double> weight_grad, std::span<double> bias_grad) {
    for (std::size_t c = 0; c < class_count; ++c) {
        double* wg = weight_grad.data() + c * dim;
        std::fill(wg, wg + dim, 0.0);
        double bg = 0.0;
        for (std::size_t m = 0; m < rows; ++m) {
            const double k = coef[m * class_count + c];
            bg += k;
            const double* x = features.data() + m * dim;
            for (std::size_t j = 0; j < dim; ++j) wg[j] += k * x[j];
        }
        bias_grad[c] = bg;
    }
}

void accumulate_grad(std::span<const double> coef, std::span<const double> features,
                     std::size_t rows, std::size_t class_count, std::size_t dim,
                     std::span<double> weight_grad, std::span<double> bias_grad) {
    const double* kf = coef.data();
    const double* x0 = features.data();
#pragma omp parallel for schedule(static) if (class_count >= 4 && rows * dim >= 4096)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(class_count); ++c) {
        double* wg = weight_grad.data() + c * dim;
        std::fill(wg, wg + dim, 0.0);
        double bg = 0.0;
        for (std::size_t m = 0; m < rows; ++m) {
            const double k = kf[m * class_count + c];
            bg += k;
            const double* x = x0 + m * dim;
            for (std::size_t j = 0; j < dim; ++j) wg[j] += k * x[j];
        }
        bias_grad[c] = bg;
    }
}

std::size_t count_correct_serial(std::span<const double> weights, std::span<const double> bias,
                                 std::size_t class_count, std::size_t dim,
                                 std::span<const double> features,
                                 std::span<const std::uint32_t> labels) {
    std::size_t correct = 0;
    std::vector<double> row(class_count);
    for (std::size_t m = 0; m < labels.size(); ++m) {
        row_logits(weights.data(), bias.data(), class_count, dim,
                   features.data() + m * dim, row.data());
        if (row_argmax(row.data(), class_count) == labels[m]) ++correct;
    }
    return correct;
}

std::size_t count_correct(std::span<const double> weights, std::span<const double> bias,
                          std::size_t class_count, std::size_t dim,
                          std::span<const double> features,
                          std::span<const std::uint32_t> labels) {
    const std::size_t rows = labels.size();
    const double* w = weights.data();
    const double* b = bias.data();
    const double* x = features.data();
    const std::uint32_t* y = labels.data();
    std::size_t correct = 0;
#pragma omp parallel if (rows >= 64)
    {
        std::vector<double> row(class_count);
        std::size_t local = 0;
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(rows); ++m) {
            row_logits(w, b, class_count, dim, x + m * dim, row.data());
            if (row_argmax(row.data(), class_count) == y[m]) ++local;
        }
#pragma omp atomic
        correct += local;
    }
    return correct;
}

void column_stddev_serial(std::span<const double> features, std::size_t rows, std::size_t dim,
                          std::span<double> stddev_out) {
    for (std::size_t j = 0; j < dim; ++j) {
        double sum = 0.0;
        for (std::size_t m = 0; m < rows; ++m) sum += features[m * dim + j];
        const double mean = sum / static_cast<double>(rows);
        double sq = 0.0;
        for (std::size_t m = 0; m < rows; ++m) {
            const double diff = features[m * dim + j] - mean;
            sq += diff * diff;
        }
        stddev_out[j] = rows > 1 ? std::sqrt(sq / static_cast<double>(rows - 1)) : 0.0;
    }
}

void column_stddev(std::span<const double> features, std::size_t rows, std::size_t dim,
                   std::span<double> stddev_out) {
    const double* x = features.data();
    double* out = stddev_out.data();
#pragma omp parallel for schedule(static) if (rows * dim >= 4096)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(dim); ++j) {
        double sum = 0.0;
        for (std::size_t m = 0; m < rows; ++m) sum += x[m * dim + j];
        const double mean = sum / static_cast<double>(rows);
        double sq = 0.0;
        for (std::size_t m = 0; m < rows; ++m) {
            const double diff = x[m * dim + j] - mean;
            sq += diff * diff;
        }
        out[j] = rows > 1 ? std::sqrt(sq / static_cast<double>(rows - 1)) : 0.0;
    }
}

std::size_t normalize_rows_serial(std::span<double> features, std::size_t rows, std::size_t dim) {
    for (std::size_t m = 0; m < rows; ++m) {
        double* x = features.data() + m * dim;
        double sq = 0.0;
        for (std::size_t j = 0; j < dim; ++j) sq += x[j] * x[j];
        if (sq == 0.0) return m;
        const double inv = 1.0 / std::sqrt(sq);
        for (std::size_t j = 0; j < dim; ++j) x[j] *= inv;
    }
    return rows;
}

std::size_t normalize_rows(std::span<double> features, std::size_t rows, std::size_t dim) {
    double* x0 = features.data();
    std::size_t bad = rows;
#pragma omp parallel for schedule(static) if (rows * dim >= 4096) reduction(min : bad)
    for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(rows); ++m) {
        double* x = x0 + m * dim;
        double sq = 0.0;
        for (std::size_t j = 0; j < dim; ++j) sq += x[j] * x[j];
        if (sq == 0.0) {
            bad = std::min(bad, static_cast<std::size_t>(m));
        } else {
            const double inv = 1.0 / std::sqrt(sq);
            for (std::size_t j = 0; j < dim; ++j) x[j] *= inv;
        }
    }
    return bad;
}

} // namespace ibm2::kernels
