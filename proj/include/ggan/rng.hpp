#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace ggan {

/// Seeded random source. Uniform and normal variates are derived from the raw
/// mt19937_64 stream directly so that sequences do not depend on the standard
/// library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    /// Standard normal via the Marsaglia polar method.
    double normal();

    /// Independent child stream; does not perturb this generator beyond one draw.
    Rng fork() { return Rng(engine_()); }

    std::string serialize() const;
    static Rng deserialize(const std::string& text);

    bool operator==(const Rng& other) const;

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace ggan
