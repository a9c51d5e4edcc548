#include "debias/rng.hpp"

#include <cmath>
#include <numbers>

namespace debias {

namespace {

uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

} // namespace

Rng::Rng(uint64_t seed) : seed_(seed) {
    uint64_t sm = seed;
    for (auto& s : state_) s = splitmix64(sm);
    // xoshiro must not start in the all-zero state.
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
}

Rng Rng::substream(std::string_view name) const {
    uint64_t mix = seed_ ^ rotl(fnv1a64(name), 17);
    return Rng(splitmix64(mix));
}

Rng Rng::substream(std::string_view name, uint64_t index) const {
    uint64_t mix = seed_ ^ rotl(fnv1a64(name), 17) ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    return Rng(splitmix64(mix));
}

uint64_t Rng::next_u64() {
    uint64_t result = rotl(state_[1] * 5, 7) * 9;
    uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double Rng::normal() {
    // Box-Muller; u1 shifted away from 0 so log() stays finite.
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

uint32_t Rng::below(uint32_t n) {
    if (n == 0) return 0;
    // Rejection sampling over the largest multiple of n below 2^32.
    uint64_t threshold = (0x100000000ULL / n) * n;
    for (;;) {
        uint64_t r = next_u64() >> 32;
        if (r < threshold) return static_cast<uint32_t>(r % n);
    }
}

std::vector<int> Rng::permutation(int n) {
    std::vector<int> p(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) p[static_cast<size_t>(i)] = i;
    shuffle(p);
    return p;
}

} // namespace debias
