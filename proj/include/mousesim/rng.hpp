#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace mousesim {

// Seeded generator with distribution helpers written out explicitly. The
// standard <random> distributions are implementation-defined, so using them
// would tie saved experiments to one standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), rejection sampled to avoid modulo bias.
    std::uint64_t index(std::uint64_t n);

    double normal();

    double exponential(double mean);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(index(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Derives an independent stream seed from a root seed and a label, so every
// random choice in a run traces back to one root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace mousesim
