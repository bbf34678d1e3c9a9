#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace ibm2::kernels {

// Data-parallel primitives shared by the trainer and the data pipeline. Each
// kernel has a `_serial` reference implementation; the OpenMP variants are
// organized so that every floating-point sum runs in the same order as the
// reference (parallelism splits independent rows/columns, never a single
// accumulation chain), hence results are bit-identical for any thread count.

// logits[m*C+c] = dot(W[c,:], X[m,:]) + bias[c]   for m in [0,M)
void batch_logits(std::span<const double> weights, std::span<const double> bias,
                  std::size_t class_count, std::size_t dim,
                  std::span<const double> features, std::size_t rows,
                  std::span<double> logits_out);
void batch_logits_serial(std::span<const double> weights, std::span<const double> bias,
                         std::size_t class_count, std::size_t dim,
                         std::span<const double> features, std::size_t rows,
                         std::span<double> logits_out);

// Row-wise softmax in place, log-sum-exp stabilized.
void softmax_rows(std::span<double> logits, std::size_t rows, std::size_t class_count);
void softmax_rows_serial(std::span<double> logits, std::size_t rows, std::size_t class_count);

// Fused loss/gradient-coefficient pass. In: logits (rows x C). Out, in place:
// coef[m,c] = (softmax(logits[m])_c - q_c) * inv_batch with the label-smoothed
// target q; per-row smoothed cross-entropy goes to loss_out. Log-sum-exp
// stabilized; finite logits can never produce NaN.
void softmax_ce_coef(std::span<double> logits_inout, std::span<const std::uint32_t> labels,
                     std::size_t class_count, double label_smoothing, double inv_batch,
                     std::span<double> loss_out);
void softmax_ce_coef_serial(std::span<double> logits_inout, std::span<const std::uint32_t> labels,
                            std::size_t class_count, double label_smoothing, double inv_batch,
                            std::span<double> loss_out);

// weight_grad[c,:] = sum_m coef[m*C+c] * X[m,:];  bias_grad[c] = sum_m coef[m*C+c]
// The m-sum runs in ascending m for every c in both variants.
void accumulate_grad(std::span<const double> coef, std::span<const double> features,
                     std::size_t rows, std::size_t class_count, std::size_t dim,
                     std::span<double> weight_grad, std::span<double> bias_grad);
void accumulate_grad_serial(std::span<const double> coef, std::span<const double> features,
                            std::size_t rows, std::size_t class_count, std::size_t dim,
                            std::span<double> weight_grad, std::span<double> bias_grad);

// Number of rows whose argmax logit (ties toward the lowest class index)
// equals the label. Integer reduction, so order never matters.
std::size_t count_correct(std::span<const double> weights, std::span<const double> bias,
                          std::size_t class_count, std::size_t dim,
                          std::span<const double> features,
                          std::span<const std::uint32_t> labels);
std::size_t count_correct_serial(std::span<const double> weights, std::span<const double> bias,
                                 std::size_t class_count, std::size_t dim,
                                 std::span<const double> features,
                                 std::span<const std::uint32_t> labels);

// Bessel-corrected (divisor M-1) per-column standard deviation, two-pass.
void column_stddev(std::span<const double> features, std::size_t rows, std::size_t dim,
                   std::span<double> stddev_out);
void column_stddev_serial(std::span<const double> features, std::size_t rows, std::size_t dim,
                          std::span<double> stddev_out);

// Divides each row by its Euclidean norm. Returns the first zero-norm row
// index, or rows if none (caller decides whether that is an error).
std::size_t normalize_rows(std::span<double> features, std::size_t rows, std::size_t dim);
std::size_t normalize_rows_serial(std::span<double> features, std::size_t rows, std::size_t dim);

} // namespace ibm2::kernels
