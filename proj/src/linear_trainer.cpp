#include "ibm2/linear_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "ibm2/error.hpp"
#include "ibm2/kernels.hpp"
#include "ibm2/rng.hpp"

namespace ibm2 {

namespace {

constexpr std::uint64_t kShuffleTag = 0x53485546ull; // "SHUF"

constexpr char kHeadMagic[8] = {'I', 'B', 'M', '2', 'H', 'E', 'A', 'D'};
constexpr std::uint32_t kHeadVersion = 1;

void check_dims(const LinearHead& head, std::size_t dim) {
    if (head.d != dim) {
        throw Error(ErrorCode::dimension_mismatch,
                    "head expects d=" + std::to_string(head.d) + ", got " + std::to_string(dim));
    }
}

// Gathers rows on demand; materializes lazy sources once when they fit the
// configured cache budget.
class SourceCursor {
public:
    SourceCursor(const ExampleSource& source, std::size_t cache_limit_bytes) : source_(source) {
        const std::size_t bytes = source.size() * source.dim() * sizeof(double);
        if (bytes <= cache_limit_bytes) {
            cache_.resize(source.size() * source.dim());
            double* base = cache_.data();
            const std::size_t dim = source.dim();
#pragma omp parallel for schedule(static) if (source.size() >= 128)
            for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(source.size()); ++i) {
                source.fill(i, {base + i * dim, dim});
            }
        }
    }

    void gather(std::span<const std::size_t> indices, std::span<double> out) const {
        const std::size_t dim = source_.dim();
        if (!cache_.empty()) {
            for (std::size_t k = 0; k < indices.size(); ++k) {
                std::memcpy(out.data() + k * dim, cache_.data() + indices[k] * dim, dim * sizeof(double));
            }
            return;
        }
        const std::size_t* idx = indices.data();
        double* base = out.data();
#pragma omp parallel for schedule(static) if (indices.size() >= 32)
        for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(indices.size()); ++k) {
            source_.fill(idx[k], {base + k * dim, dim});
        }
    }

private:
    const ExampleSource& source_;
    std::vector<double> cache_;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    double beta1_t = 1.0;
    double beta2_t = 1.0;

    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    void step(std::span<double> params, std::span<const double> grad, double lr, double beta1,
              double beta2, double eps) {
        beta1_t *= beta1;
        beta2_t *= beta2;
        const double m_corr = 1.0 / (1.0 - beta1_t);
        const double v_corr = 1.0 / (1.0 - beta2_t);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            params[i] -= lr * (m[i] * m_corr) / (std::sqrt(v[i] * v_corr) + eps);
        }
    }
};

double accuracy_over(const LinearHead& head, const SourceCursor& cursor, const ExampleSource& source) {
    const std::size_t total = source.size();
    const std::size_t dim = source.dim();
    const std::size_t chunk = std::min<std::size_t>(total, 8192);
    std::vector<double> buffer(chunk * dim);
    std::vector<std::uint32_t> labels(chunk);
    std::vector<std::size_t> indices(chunk);

    std::size_t correct = 0;
    for (std::size_t start = 0; start < total; start += chunk) {
        const std::size_t count = std::min(chunk, total - start);
        std::iota(indices.begin(), indices.begin() + count, start);
        cursor.gather({indices.data(), count}, {buffer.data(), count * dim});
        for (std::size_t k = 0; k < count; ++k) labels[k] = source.label(start + k);
        correct += kernels::count_correct(head.weights, head.bias, head.class_count, dim,
                                          {buffer.data(), count * dim}, {labels.data(), count});
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

} // namespace

void TrainConfig::validate() const {
    if (init_lr < 0.0 || !std::isfinite(init_lr)) throw Error(ErrorCode::invalid_config, "init_lr must be >= 0");
    if (batch_size < 1) throw Error(ErrorCode::invalid_config, "batch_size must be >= 1");
    if (epochs < 1) throw Error(ErrorCode::invalid_config, "epochs must be >= 1");
    if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
        throw Error(ErrorCode::invalid_config, "label_smoothing must be in [0, 1)");
    }
}

LinearHead init_head(std::size_t d, std::uint32_t class_count, std::uint64_t seed) {
    if (d < 1 || class_count < 1) throw Error(ErrorCode::invalid_spec, "head needs d >= 1 and C >= 1");
    LinearHead head;
    head.d = d;
    head.class_count = class_count;
    head.weights.resize(static_cast<std::size_t>(class_count) * d);
    head.bias.assign(class_count, 0.0);
    rng::Stream stream(seed);
    stream.fill_normal(head.weights);
    for (double& w : head.weights) w *= 0.01;
    return head;
}

std::vector<double> logits(const LinearHead& head, std::span<const double> x) {
    check_dims(head, x.size());
    std::vector<double> out(head.class_count);
    kernels::batch_logits_serial(head.weights, head.bias, head.class_count, head.d, x, 1, out);
    return out;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.begin(), logits.end());
    kernels::softmax_rows_serial(p, 1, p.size());
    return p;
}

double smoothed_ce(std::span<const double> logits, std::uint32_t label, double label_smoothing) {
    const std::size_t class_count = logits.size();
    if (label >= class_count) {
        throw Error(ErrorCode::label_out_of_range, "label " + std::to_string(label));
    }
    double hi = logits[0];
    for (double v : logits) hi = std::max(hi, v);
    double sum_exp = 0.0;
    double sum_logits = 0.0;
    for (double v : logits) {
        sum_exp += std::exp(v - hi);
        sum_logits += v;
    }
    const double lse = hi + std::log(sum_exp);
    const double uniform = label_smoothing / static_cast<double>(class_count);
    return lse - (1.0 - label_smoothing) * logits[label] - uniform * sum_logits;
}

HeadGradient grad_smoothed_ce(const LinearHead& head, std::span<const double> batch_features,
                              std::span<const std::uint32_t> batch_labels, double label_smoothing) {
    if (batch_labels.empty()) throw Error(ErrorCode::empty_input, "gradient needs a nonempty batch");
    if (batch_features.size() != batch_labels.size() * head.d) {
        throw Error(ErrorCode::dimension_mismatch, "batch feature storage does not match labels * d");
    }
    const std::size_t rows = batch_labels.size();
    std::vector<double> coef(rows * head.class_count);
    kernels::batch_logits(head.weights, head.bias, head.class_count, head.d, batch_features, rows, coef);
    std::vector<double> loss(rows);
    kernels::softmax_ce_coef(coef, batch_labels, head.class_count, label_smoothing,
                             1.0 / static_cast<double>(rows), loss);

    HeadGradient grad;
    grad.weights.resize(head.weights.size());
    grad.bias.resize(head.class_count);
    kernels::accumulate_grad(coef, batch_features, rows, head.class_count, head.d, grad.weights,
                             grad.bias);
    return grad;
}

double cosine_lr(std::size_t step, std::size_t total_steps, double init_lr) {
    if (total_steps < 1 || step > total_steps) {
        throw Error(ErrorCode::invalid_spec,
                    "cosine_lr needs 0 <= step <= total_steps, total_steps >= 1");
    }
    const double ratio = static_cast<double>(step) / static_cast<double>(total_steps);
    return init_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * ratio));
}

double train_from(LinearHead& head, const ExampleSource& source, const TrainConfig& config) {
    config.validate();
    check_dims(head, source.dim());
    const std::size_t total = source.size();
    if (total == 0) throw Error(ErrorCode::empty_input, "training source is empty");

    const std::size_t batch = std::min(config.batch_size, total);
    const std::size_t steps_per_epoch = (total + config.batch_size - 1) / config.batch_size;
    const std::size_t total_steps = steps_per_epoch * static_cast<std::size_t>(config.epochs);
    const double lr_scale = static_cast<double>(config.batch_size) / 256.0;

    SourceCursor cursor(source, config.cache_limit_bytes);
    AdamState adam_w(head.weights.size());
    AdamState adam_b(head.bias.size());

    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> batch_features(batch * head.d);
    std::vector<std::uint32_t> batch_labels(batch);
    std::vector<double> coef(batch * head.class_count);
    std::vector<double> row_loss(batch);

    std::size_t step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng::Stream shuffle_stream(rng::mix64(rng::mix64(config.seed, kShuffleTag),
                                              static_cast<std::uint64_t>(epoch)));
        shuffle_stream.shuffle(order);

        for (std::size_t start = 0; start < total; start += config.batch_size, ++step) {
            const std::size_t count = std::min(config.batch_size, total - start);
            cursor.gather({order.data() + start, count}, {batch_features.data(), count * head.d});
            for (std::size_t k = 0; k < count; ++k) batch_labels[k] = source.label(order[start + k]);

            kernels::batch_logits(head.weights, head.bias, head.class_count, head.d,
                                  {batch_features.data(), count * head.d}, count,
                                  {coef.data(), count * head.class_count});
            kernels::softmax_ce_coef({coef.data(), count * head.class_count},
                                     {batch_labels.data(), count}, head.class_count,
                                     config.label_smoothing, 1.0 / static_cast<double>(count),
                                     {row_loss.data(), count});

            double loss = 0.0;
            for (std::size_t k = 0; k < count; ++k) loss += row_loss[k];
            loss /= static_cast<double>(count);

            const double lr = cosine_lr(step, total_steps, config.init_lr) * lr_scale;
            if (!std::isfinite(loss)) {
                std::ostringstream msg;
                msg << "training diverged at step " << step << " (lr " << lr << ")";
                throw Error(ErrorCode::nan_loss, msg.str());
            }

            HeadGradient grad;
            grad.weights.resize(head.weights.size());
            grad.bias.resize(head.bias.size());
            kernels::accumulate_grad({coef.data(), count * head.class_count},
                                     {batch_features.data(), count * head.d}, count,
                                     head.class_count, head.d, grad.weights, grad.bias);

            adam_w.step(head.weights, grad.weights, lr, config.beta1, config.beta2, config.adam_eps);
            adam_b.step(head.bias, grad.bias, lr, config.beta1, config.beta2, config.adam_eps);
        }
    }

    return accuracy_over(head, cursor, source);
}

TrainResult train(const ExampleSource& source, std::uint32_t class_count, const TrainConfig& config) {
    TrainResult result;
    result.head = init_head(source.dim(), class_count, config.seed);
    result.train_accuracy = train_from(result.head, source, config);
    return result;
}

double evaluate(const LinearHead& head, const FeatureDataset& dataset) {
    check_dims(head, dataset.d);
    if (dataset.rows() == 0) throw Error(ErrorCode::empty_input, "evaluate needs a nonempty dataset");
    const std::size_t correct = kernels::count_correct(head.weights, head.bias, head.class_count,
                                                       head.d, dataset.features, dataset.labels);
    return static_cast<double>(correct) / static_cast<double>(dataset.rows());
}

double evaluate_source(const LinearHead& head, const ExampleSource& source) {
    check_dims(head, source.dim());
    if (source.size() == 0) throw Error(ErrorCode::empty_input, "evaluate needs a nonempty source");
    SourceCursor cursor(source, 0); // chunked, no full materialization
    return accuracy_over(head, cursor, source);
}

std::vector<std::uint32_t> predict(const LinearHead& head, const FeatureDataset& dataset) {
    check_dims(head, dataset.d);
    const std::size_t rows = dataset.rows();
    std::vector<std::uint32_t> out(rows);
    std::vector<double> all_logits(rows * head.class_count);
    kernels::batch_logits(head.weights, head.bias, head.class_count, head.d, dataset.features, rows,
                          all_logits);
    for (std::size_t m = 0; m < rows; ++m) {
        const double* row = all_logits.data() + m * head.class_count;
        std::size_t best = 0;
        for (std::size_t c = 1; c < head.class_count; ++c) {
            if (row[c] > row[best]) best = c;
        }
        out[m] = static_cast<std::uint32_t>(best);
    }
    return out;
}

namespace {

void put_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64_le(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::uint32_t take_u32_le(const std::string& data, std::size_t& pos) {
    if (pos + 4 > data.size()) throw Error(ErrorCode::truncated_payload, "head file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

double take_f64_le(const std::string& data, std::size_t& pos) {
    if (pos + 8 > data.size()) throw Error(ErrorCode::truncated_payload, "head file");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    pos += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace

void save_head(const LinearHead& head, const std::filesystem::path& path) {
    std::string out;
    out.append(kHeadMagic, 8);
    put_u32_le(out, kHeadVersion);
    put_u32_le(out, static_cast<std::uint32_t>(head.d));
    put_u32_le(out, head.class_count);
    for (double w : head.weights) put_f64_le(out, w);
    for (double b : head.bias) put_f64_le(out, b);

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error(ErrorCode::io_failure, "cannot open " + path.string());
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file.good()) throw Error(ErrorCode::io_failure, "writing " + path.string());
}

LinearHead load_head(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw Error(ErrorCode::missing_file, path.string());
    std::ostringstream buf;
    buf << file.rdbuf();
    const std::string data = std::move(buf).str();

    if (data.size() < 8 || std::memcmp(data.data(), kHeadMagic, 8) != 0) {
        throw Error(ErrorCode::bad_magic, "not an IBM2HEAD file: " + path.string());
    }
    std::size_t pos = 8;
    const std::uint32_t version = take_u32_le(data, pos);
    if (version != kHeadVersion) {
        throw Error(ErrorCode::version_mismatch, "head file version " + std::to_string(version));
    }
    LinearHead head;
    head.d = take_u32_le(data, pos);
    head.class_count = take_u32_le(data, pos);
    head.weights.resize(static_cast<std::size_t>(head.class_count) * head.d);
    head.bias.resize(head.class_count);
    for (double& w : head.weights) w = take_f64_le(data, pos);
    for (double& b : head.bias) b = take_f64_le(data, pos);
    if (pos != data.size()) throw Error(ErrorCode::invalid_spec, "trailing bytes in head file");
    return head;
}

} // namespace ibm2
