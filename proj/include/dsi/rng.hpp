#pragma once

// Counter-based RNG streams (Philox4x32-10). A stream is addressed by
// (seed, stream_id); the 128-bit block counter is [block_lo, block_hi,
// stream_lo, stream_hi] with key = seed, so distinct stream ids index
// disjoint counter ranges and parallel workers can derive independent
// streams without coordination. Identical (seed, stream_id, draw sequence)
// reproduces identical output on every platform.

#include <cstddef>
#include <cstdint>

namespace dsi {

class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    // Uniform in [0,1) with 53 random bits.
    double next_unit();
    // Uniform in (0,1]; used where log(u) must stay finite.
    double next_unit_pos();
    // Standard normal via Box-Muller (pairs cached).
    double next_normal();
    // Uniform integer in [0, n), rejection-sampled, n >= 1.
    std::uint64_t next_below(std::uint64_t n);

    void fill_normal(double* dst, std::size_t n);

private:
    void refill();

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t block_ = 0;
    std::uint32_t buf_[4];
    int buf_pos_ = 4;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

// Well-known sub-stream namespaces so different pipeline stages never share a
// stream id even when their indices collide.
enum class StreamKind : std::uint64_t {
    DataGen = 1,
    DiffusionTrain = 2,
    PredictorTrain = 3,
    EvalSample = 4,
    Theorem = 5,
    Sampling = 6,
    Init = 7,
};

inline RngStream make_stream(std::uint64_t seed, StreamKind kind, std::uint64_t index) {
    return RngStream(seed, (static_cast<std::uint64_t>(kind) << 48) ^ index);
}

namespace detail {
// One Philox4x32-10 block; exposed for the known-answer tests.
void philox4x32_10(const std::uint32_t key[2], const std::uint32_t ctr[4],
                   std::uint32_t out[4]);
}  // namespace detail

}  // namespace dsi
