#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace benchstitch {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Independent child stream seed; replicas and grid cells each get one so the
// result of any unit does not depend on evaluation order.
inline std::uint64_t child_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(master ^ splitmix64(a + 1)) ^ splitmix64(b + 0x51ED27ull));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }

    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
    }

    double normal(double mean, double sd) {
        if (sd == 0.0) return mean;
        return std::normal_distribution<double>(mean, sd)(engine_);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        // Fisher-Yates with our own index draws; std::shuffle's draw pattern
        // is implementation-defined.
        for (std::size_t i = v.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices from [0, n), returned sorted.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        k = std::min(k, n);
        for (std::size_t i = 0; i < k; ++i) {
            auto j = static_cast<std::size_t>(uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(n) - 1));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        std::sort(idx.begin(), idx.end());
        return idx;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace benchstitch
