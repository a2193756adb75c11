#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace textrisk {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t splitmix64(std::uint64_t x);

// Derives an independent seed for a named consumer of randomness, so adding a
// new stream never shifts the draws of an existing one.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream_name);

// Thin wrapper over mt19937_64 with hand-written distributions. The standard
// <random> distributions are implementation-defined; these are not, which keeps
// generated corpora byte-identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static Rng stream(std::uint64_t root, std::string_view name) { return Rng(derive_seed(root, name)); }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    double normal();

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Draws indices proportionally to non-negative weights via a cumulative table.
class DiscreteSampler {
public:
    DiscreteSampler() = default;
    explicit DiscreteSampler(std::span<const double> weights);

    std::size_t sample(Rng& rng) const;
    std::size_t size() const { return cumulative_.size(); }

private:
    std::vector<double> cumulative_;
};

} // namespace textrisk
