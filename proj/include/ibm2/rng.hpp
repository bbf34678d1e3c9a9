#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace ibm2::rng {

// Counter-based generator built on the splitmix64 finalizer. Output word n of
// a stream is a pure function of (key, n), so any position can be produced on
// any thread without shared state, and replaying a key replays the stream
// bit-for-bit.

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

constexpr std::uint64_t split_finalize(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
}

// Public mixing function used to derive sub-seeds (episode seeds, stage
// seeds, per-class streams). Documented in the README so that reports can be
// reproduced one episode at a time.
constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = split_finalize(a + kGolden);
    return split_finalize(h ^ (b + 0xd1b54a32d192ed03ull));
}

constexpr std::uint64_t word_at(std::uint64_t key, std::uint64_t counter) {
    return split_finalize(key + (counter + 1) * kGolden);
}

class Stream {
public:
    explicit Stream(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() { return word_at(key_, counter_++); }

    // [0, 1)
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // (0, 1] — safe as a log() argument
    double next_unit_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    // Uniform in [0, n) via the 128-bit multiply trick. One word per draw,
    // bias below 2^-64 * n.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Standard normals via Box-Muller. Consumes exactly 2 words per pair
    // regardless of the values drawn, so consumption is position-independent.
    void fill_normal(std::span<double> out) {
        std::size_t i = 0;
        while (i < out.size()) {
            const double u1 = next_unit_pos();
            const double u2 = next_unit();
            const double radius = std::sqrt(-2.0 * std::log(u1));
            const double angle = 2.0 * std::numbers::pi * u2;
            out[i++] = radius * std::cos(angle);
            if (i < out.size()) out[i++] = radius * std::sin(angle);
        }
    }

    double next_normal() {
        double v;
        fill_normal({&v, 1});
        return v;
    }

    // Deterministic Fisher-Yates over an index container.
    template <typename Container>
    void shuffle(Container& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace ibm2::rng
