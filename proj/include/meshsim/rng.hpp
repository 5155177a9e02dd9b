#pragma once

#include <cstdint>
#include <cstddef>

namespace meshsim {

// xoshiro256++ with splitmix64 seeding. Self-contained so that draw
// sequences are identical on every platform (std:: distributions are not
// portable). One stream per node plus one for the medium; streams derived
// from (scenario seed, stream id) are statistically independent.
class RngStream {
public:
    RngStream() : RngStream(0, 0) {}
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t next_u64();

    // Uniform in [0, 1).
    double next_double();

    // Uniform integer in [0, n); n must be > 0.
    std::uint64_t next_below(std::uint64_t n);

    bool bernoulli(double p);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

private:
    std::uint64_t s_[4];
    std::uint64_t seed_ = 0;
    std::uint64_t stream_id_ = 0;
};

// splitmix64 step, exposed for hashing/digest use.
std::uint64_t splitmix64(std::uint64_t& state);

} // namespace meshsim
