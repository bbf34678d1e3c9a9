#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "ibm2/rng.hpp"

using namespace ibm2;

TEST_CASE("stream words are a pure function of key and position") {
    rng::Stream a(42);
    rng::Stream b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(rng::word_at(42, 7) == rng::word_at(42, 7));
    CHECK(rng::word_at(42, 7) != rng::word_at(42, 8));
    CHECK(rng::word_at(42, 7) != rng::word_at(43, 7));
}

TEST_CASE("unit draws stay in range") {
    rng::Stream s(9);
    for (int i = 0; i < 1000; ++i) {
        const double u = s.next_unit();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    rng::Stream t(9);
    for (int i = 0; i < 1000; ++i) {
        const double u = t.next_unit_pos();
        CHECK(u > 0.0);
        CHECK(u <= 1.0);
    }
}

TEST_CASE("below is roughly uniform and always in range") {
    rng::Stream s(123);
    std::vector<int> counts(5, 0);
    const int draws = 50000;
    for (int i = 0; i < draws; ++i) {
        const std::uint64_t v = s.below(5);
        REQUIRE(v < 5);
        ++counts[v];
    }
    for (int c : counts) CHECK(std::abs(c - draws / 5) < 600);
}

TEST_CASE("normal moments") {
    rng::Stream s(777);
    const int n = 200000;
    std::vector<double> buf(n);
    s.fill_normal(buf);
    double mean = 0.0;
    for (double v : buf) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : buf) var += (v - mean) * (v - mean);
    var /= n - 1;
    CHECK(std::abs(mean) < 0.01);
    CHECK(var > 0.99);
    CHECK(var < 1.01);
}

TEST_CASE("mix64 separates nearby keys") {
    CHECK(rng::mix64(0, 0) != rng::mix64(0, 1));
    CHECK(rng::mix64(0, 1) != rng::mix64(1, 0));
    CHECK(rng::mix64(5, 5) != rng::mix64(5, 6));
}

TEST_CASE("shuffle is a permutation and seed-stable") {
    std::vector<int> items = {0, 1, 2, 3, 4, 5, 6, 7};
    rng::Stream s(31);
    s.shuffle(items);
    std::vector<int> again = {0, 1, 2, 3, 4, 5, 6, 7};
    rng::Stream t(31);
    t.shuffle(again);
    CHECK(items == again);
    std::vector<int> sorted = items;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>({0, 1, 2, 3, 4, 5, 6, 7}));
}
