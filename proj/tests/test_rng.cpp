#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "dsi/rng.hpp"

using namespace dsi;

TEST_CASE("philox4x32-10 known-answer vectors") {
    // Reference vectors from the Random123 test suite (kat_vectors).
    std::uint32_t out[4];

    const std::uint32_t zkey[2] = {0, 0};
    const std::uint32_t zctr[4] = {0, 0, 0, 0};
    detail::philox4x32_10(zkey, zctr, out);
    CHECK(out[0] == 0x6627e8d5u);
    CHECK(out[1] == 0xe169c58du);
    CHECK(out[2] == 0xbc57ac4cu);
    CHECK(out[3] == 0x9b00dbd8u);

    const std::uint32_t fkey[2] = {0xffffffffu, 0xffffffffu};
    const std::uint32_t fctr[4] = {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu};
    detail::philox4x32_10(fkey, fctr, out);
    CHECK(out[0] == 0x408f276du);
    CHECK(out[1] == 0x41c83b0eu);
    CHECK(out[2] == 0xa20bc7c6u);
    CHECK(out[3] == 0x6d5451fdu);

    const std::uint32_t pkey[2] = {0xa4093822u, 0x299f31d0u};
    const std::uint32_t pctr[4] = {0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u};
    detail::philox4x32_10(pkey, pctr, out);
    CHECK(out[0] == 0xd16cfe09u);
    CHECK(out[1] == 0x94fdccebu);
    CHECK(out[2] == 0x5001e420u);
    CHECK(out[3] == 0x24126ea1u);
}

TEST_CASE("streams are reproducible and distinct") {
    RngStream a(99, 1), b(99, 1), c(99, 2), d(100, 1);
    bool same_ab = true, differ_ac = false, differ_ad = false;
    for (int i = 0; i < 256; ++i) {
        const auto va = a.next_u64();
        same_ab = same_ab && (va == b.next_u64());
        differ_ac = differ_ac || (va != c.next_u64());
        differ_ad = differ_ad || (va != d.next_u64());
    }
    CHECK(same_ab);
    CHECK(differ_ac);
    CHECK(differ_ad);
}

TEST_CASE("uniform and bounded draws stay in range") {
    RngStream rng(4, 4);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.next_unit();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.next_unit_pos();
        CHECK(u > 0.0);
        CHECK(u <= 1.0);
    }
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 7000; ++i) ++counts[rng.next_below(7)];
    for (int bucket : counts) CHECK(bucket > 700);  // ~1000 expected each
    CHECK_THROWS_AS(rng.next_below(0), std::invalid_argument);
}

TEST_CASE("normal draws have the right first two moments") {
    RngStream rng(2024, 0);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.next_normal();
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    // 3 standard errors: se(mean) = 1/sqrt(n), se(var) ~ sqrt(2/n)
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("make_stream separates pipeline namespaces") {
    auto a = make_stream(7, StreamKind::EvalSample, 3);
    auto b = make_stream(7, StreamKind::DiffusionTrain, 3);
    bool differ = false;
    for (int i = 0; i < 16; ++i) differ = differ || (a.next_u64() != b.next_u64());
    CHECK(differ);
}
