#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace debias {

// Deterministic PRNG (xoshiro256**) with named substreams.
//
// All randomness in a run flows from one root seed. Components derive
// independent streams with substream("init"), substream("shuffle", epoch),
// etc., so re-seeding one component never perturbs another. The generator
// is self-contained (no std::*_distribution), which keeps outputs
// bit-identical across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed);

    // Independent stream derived from this stream's *construction* seed and
    // a label; does not consume state from the parent.
    Rng substream(std::string_view name) const;
    Rng substream(std::string_view name, uint64_t index) const;

    uint64_t seed() const { return seed_; }

    uint64_t next_u64();

    // Uniform in [0, 1).
    double uniform();
    // Uniform in [lo, hi).
    double uniform(double lo, double hi);
    // Standard normal via Box-Muller.
    double normal();
    // Uniform integer in [0, n), n > 0. Rejection sampling, no modulo bias.
    uint32_t below(uint32_t n);

    // Fisher-Yates permutation of 0..n-1.
    std::vector<int> permutation(int n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = below(static_cast<uint32_t>(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t seed_;
    uint64_t state_[4];
};

} // namespace debias
