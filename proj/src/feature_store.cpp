#include "ibm2/feature_store.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ibm2/error.hpp"
#include "ibm2/kernels.hpp"
#include "ibm2/rng.hpp"

namespace ibm2 {

namespace {

constexpr char kMagic[8] = {'I', 'B', 'M', '2', 'F', 'E', 'A', 'T'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint32_t kFlagNormalized = 1u << 0;

// Explicit little-endian packing, independent of host byte order.

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

class ByteReader {
public:
    explicit ByteReader(std::string data) : data_(std::move(data)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte(pos_ + i)) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(byte(pos_ + i)) << (8 * i);
        pos_ += 8;
        return v;
    }

    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool exhausted() const { return pos_ == data_.size(); }

private:
    unsigned char byte(std::size_t i) const { return static_cast<unsigned char>(data_[i]); }

    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) {
            throw Error(ErrorCode::truncated_payload,
                        "need " + std::to_string(n) + " bytes at offset " + std::to_string(pos_));
        }
    }

    std::string data_;
    std::size_t pos_ = 0;
};

std::string read_whole_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::missing_file, path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (!in.good() && !in.eof()) throw Error(ErrorCode::io_failure, "reading " + path.string());
    return std::move(buf).str();
}

void write_whole_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_failure, "cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out.good()) throw Error(ErrorCode::io_failure, "writing " + path.string());
}

std::string format_g17(double v) {
    std::array<char, 40> buf{};
    const int len = std::snprintf(buf.data(), buf.size(), "%.17g", v);
    return std::string(buf.data(), static_cast<std::size_t>(len));
}

} // namespace

void FeatureDataset::validate() const {
    if (d == 0) throw Error(ErrorCode::invalid_spec, "d must be >= 1");
    if (class_count == 0) throw Error(ErrorCode::invalid_spec, "class count must be >= 1");
    if (labels.empty()) throw Error(ErrorCode::invalid_spec, "dataset must have at least one row");
    if (features.size() != labels.size() * d) {
        throw Error(ErrorCode::dimension_mismatch,
                    "feature storage is " + std::to_string(features.size()) + " values, expected " +
                        std::to_string(labels.size() * d));
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= class_count) {
            throw Error(ErrorCode::label_out_of_range,
                        "label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                            " (class count " + std::to_string(class_count) + ")");
        }
    }
    if (!class_names.empty() && class_names.size() != class_count) {
        throw Error(ErrorCode::invalid_spec, "class-name table must be empty or have one entry per class");
    }
    if (normalized) {
        for (std::size_t i = 0; i < rows(); ++i) {
            double sq = 0.0;
            for (double v : row(i)) sq += v * v;
            if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) {
                throw Error(ErrorCode::invalid_spec,
                            "normalized flag set but row " + std::to_string(i) + " has norm " +
                                std::to_string(std::sqrt(sq)));
            }
        }
    }
}

FeatureDataset load_feature_file(const std::filesystem::path& path) {
    ByteReader reader(read_whole_file(path));

    const std::string magic = reader.bytes(8);
    if (std::memcmp(magic.data(), kMagic, 8) != 0) {
        throw Error(ErrorCode::bad_magic, "not an IBM2FEAT file: " + path.string());
    }
    const std::uint32_t version = reader.u32();
    if (version != kFormatVersion) {
        throw Error(ErrorCode::version_mismatch,
                    "feature file version " + std::to_string(version) + ", expected " +
                        std::to_string(kFormatVersion));
    }
    const std::uint32_t flags = reader.u32();

    FeatureDataset ds;
    ds.d = reader.u32();
    ds.class_count = reader.u32();
    const std::uint64_t row_count = reader.u64();
    ds.normalized = (flags & kFlagNormalized) != 0;

    ds.labels.reserve(row_count);
    ds.features.reserve(row_count * ds.d);
    for (std::uint64_t i = 0; i < row_count; ++i) {
        const std::uint32_t label = reader.u32();
        if (label >= ds.class_count) {
            throw Error(ErrorCode::label_out_of_range,
                        "record " + std::to_string(i) + " has label " + std::to_string(label) +
                            " but class count is " + std::to_string(ds.class_count));
        }
        ds.labels.push_back(label);
        for (std::size_t j = 0; j < ds.d; ++j) ds.features.push_back(static_cast<double>(reader.f32()));
    }

    const std::uint32_t name_count = reader.u32();
    if (name_count != 0) {
        if (name_count != ds.class_count) {
            throw Error(ErrorCode::invalid_spec,
                        "class-name table has " + std::to_string(name_count) + " entries, expected " +
                            std::to_string(ds.class_count));
        }
        ds.class_names.reserve(name_count);
        for (std::uint32_t i = 0; i < name_count; ++i) {
            const std::uint32_t len = reader.u32();
            ds.class_names.push_back(reader.bytes(len));
        }
    }
    if (!reader.exhausted()) {
        throw Error(ErrorCode::invalid_spec, "trailing bytes after class-name table");
    }

    ds.validate();
    return ds;
}

void write_feature_file(const FeatureDataset& dataset, const std::filesystem::path& path) {
    dataset.validate();

    std::string out;
    out.reserve(32 + dataset.rows() * (4 + dataset.d * 4));
    out.append(kMagic, 8);
    put_u32(out, kFormatVersion);
    put_u32(out, dataset.normalized ? kFlagNormalized : 0);
    put_u32(out, static_cast<std::uint32_t>(dataset.d));
    put_u32(out, dataset.class_count);
    put_u64(out, dataset.rows());
    for (std::size_t i = 0; i < dataset.rows(); ++i) {
        put_u32(out, dataset.labels[i]);
        for (double v : dataset.row(i)) put_f32(out, static_cast<float>(v));
    }
    put_u32(out, static_cast<std::uint32_t>(dataset.class_names.size()));
    for (const std::string& name : dataset.class_names) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.append(name);
    }
    write_whole_file(path, out);
}

FeatureDataset import_csv(const std::filesystem::path& path) {
    const std::string text = read_whole_file(path);

    FeatureDataset ds;
    std::size_t arity = 0; // fields per row, label included
    std::int64_t max_label = -1;
    std::size_t line_no = 0;
    std::size_t pos = 0;

    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::size_t line_end = end;
        if (line_end > pos && text[line_end - 1] == '\r') --line_end;
        ++line_no;

        if (line_end > pos) {
            std::size_t field_start = pos;
            std::size_t field_index = 0;
            while (field_start <= line_end) {
                std::size_t comma = text.find(',', field_start);
                if (comma == std::string::npos || comma > line_end) comma = line_end;
                const char* first = text.data() + field_start;
                const char* last = text.data() + comma;

                if (field_index == 0) {
                    std::int64_t label = 0;
                    auto [ptr, ec] = std::from_chars(first, last, label);
                    if (ec != std::errc() || ptr != last) {
                        throw Error(ErrorCode::non_numeric_cell,
                                    "line " + std::to_string(line_no) + " label field");
                    }
                    if (label < 0) {
                        throw Error(ErrorCode::negative_label,
                                    "line " + std::to_string(line_no) + " has label " + std::to_string(label));
                    }
                    ds.labels.push_back(static_cast<std::uint32_t>(label));
                    max_label = std::max(max_label, label);
                } else {
                    double value = 0.0;
                    auto [ptr, ec] = std::from_chars(first, last, value);
                    if (ec != std::errc() || ptr != last) {
                        throw Error(ErrorCode::non_numeric_cell,
                                    "line " + std::to_string(line_no) + " field " + std::to_string(field_index + 1));
                    }
                    ds.features.push_back(value);
                }
                ++field_index;
                if (comma == line_end) break;
                field_start = comma + 1;
            }

            if (arity == 0) {
                if (field_index < 2) {
                    throw Error(ErrorCode::invalid_spec, "first CSV row needs a label and at least one feature");
                }
                arity = field_index;
            } else if (field_index != arity) {
                throw Error(ErrorCode::ragged_rows,
                            "line " + std::to_string(line_no) + " has " + std::to_string(field_index) +
                                " fields, expected " + std::to_string(arity));
            }
        }
        pos = end + 1;
    }

    if (ds.labels.empty()) throw Error(ErrorCode::empty_input, "CSV has no rows: " + path.string());
    ds.d = arity - 1;
    ds.class_count = static_cast<std::uint32_t>(max_label + 1);
    ds.validate();
    return ds;
}

void write_csv(const FeatureDataset& dataset, const std::filesystem::path& path) {
    dataset.validate();
    std::string out;
    for (std::size_t i = 0; i < dataset.rows(); ++i) {
        out += std::to_string(dataset.labels[i]);
        for (double v : dataset.row(i)) {
            out += ',';
            out += format_g17(v);
        }
        out += '\n';
    }
    write_whole_file(path, out);
}

FeatureDataset l2_normalize(const FeatureDataset& dataset) {
    dataset.validate();
    FeatureDataset result = dataset;
    const std::size_t bad = kernels::normalize_rows(result.features, result.rows(), result.d);
    if (bad != result.rows()) {
        throw Error(ErrorCode::zero_norm_row, "row " + std::to_string(bad) + " has zero norm");
    }
    result.normalized = true;
    return result;
}

void MixtureSpec::validate() const {
    if (d == 0 || class_count == 0) throw Error(ErrorCode::invalid_spec, "mixture needs d >= 1 and C >= 1");
    if (means.size() != class_count) {
        throw Error(ErrorCode::invalid_spec, "mixture needs one mean per class");
    }
    for (const auto& mean : means) {
        if (mean.size() != d) throw Error(ErrorCode::invalid_spec, "mixture mean has wrong dimensionality");
    }
    if (stds.size() != d) throw Error(ErrorCode::invalid_spec, "mixture std vector has wrong dimensionality");
    for (double s : stds) {
        if (s < 0.0 || !std::isfinite(s)) throw Error(ErrorCode::invalid_spec, "mixture stds must be >= 0");
    }
    if (train_per_class < 1) throw Error(ErrorCode::invalid_spec, "train shots must be >= 1");
    if (test_per_class < 1) throw Error(ErrorCode::invalid_spec, "test samples per class must be >= 1");
}

namespace {

FeatureDataset draw_split(const MixtureSpec& spec, std::uint64_t split_tag, int per_class) {
    FeatureDataset ds;
    ds.d = spec.d;
    ds.class_count = spec.class_count;
    ds.labels.reserve(static_cast<std::size_t>(per_class) * spec.class_count);
    ds.features.resize(static_cast<std::size_t>(per_class) * spec.class_count * spec.d);

    std::size_t row = 0;
    for (std::uint32_t c = 0; c < spec.class_count; ++c) {
        const std::uint64_t class_key = rng::mix64(rng::mix64(spec.seed, split_tag), c);
        for (int n = 0; n < per_class; ++n, ++row) {
            double* x = ds.features.data() + row * spec.d;
            rng::Stream stream(rng::mix64(class_key, static_cast<std::uint64_t>(n)));
            stream.fill_normal({x, spec.d});
            for (std::size_t j = 0; j < spec.d; ++j) x[j] = spec.means[c][j] + spec.stds[j] * x[j];
            ds.labels.push_back(c);
        }
    }
    return ds;
}

} // namespace

std::pair<FeatureDataset, FeatureDataset> synth_mixture(const MixtureSpec& spec) {
    spec.validate();
    FeatureDataset train = draw_split(spec, 0, spec.train_per_class);
    FeatureDataset test = draw_split(spec, 1, spec.test_per_class);
    return {std::move(train), std::move(test)};
}

MixtureSpec mixture_preset(const std::string& name, std::uint64_t seed,
                           int train_per_class, int test_per_class) {
    MixtureSpec spec;
    spec.seed = seed;
    spec.train_per_class = train_per_class;
    spec.test_per_class = test_per_class;

    if (name == "iso-easy") {
        spec.d = 2;
        spec.class_count = 2;
        spec.means = {{-5.0, 0.0}, {5.0, 0.0}};
        spec.stds = {1.0, 1.0};
        return spec;
    }

    if (name != "iso" && name != "aniso") {
        throw Error(ErrorCode::invalid_spec, "unknown mixture preset '" + name + "'");
    }

    spec.d = 64;
    spec.class_count = 20;
    spec.stds.assign(spec.d, 0.35);
    if (name == "aniso") {
        // Per-dimension std sweeps one decade, geometric ramp.
        const double lo = 0.1, hi = 1.0;
        for (std::size_t j = 0; j < spec.d; ++j) {
            const double t = static_cast<double>(j) / static_cast<double>(spec.d - 1);
            spec.stds[j] = lo * std::pow(hi / lo, t);
        }
    }

    // Class means: unit-norm random directions, deterministic in the seed.
    spec.means.assign(spec.class_count, std::vector<double>(spec.d));
    for (std::uint32_t c = 0; c < spec.class_count; ++c) {
        rng::Stream stream(rng::mix64(rng::mix64(seed, 0x4d45414eull), c)); // "MEAN"
        stream.fill_normal(spec.means[c]);
        double sq = 0.0;
        for (double v : spec.means[c]) sq += v * v;
        const double inv = 1.0 / std::sqrt(sq);
        for (double& v : spec.means[c]) v *= inv;
    }
    return spec;
}

} // namespace ibm2
