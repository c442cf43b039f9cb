#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace ethtrust {

// SplitMix64. Small, fast, and identical on every platform, which is what the
// reproducibility contract needs. Streams are derived by mixing a tag into the
// seed, so per-iteration sampling is independent of how many draws earlier
// iterations consumed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    static Rng stream(std::uint64_t seed, std::uint64_t tag) {
        Rng r(seed + 0x9e3779b97f4a7c15ULL * (tag + 1));
        r.next();
        return r;
    }

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, bound). Modulo bias is negligible for the bounds used here.
    std::uint64_t next_below(std::uint64_t bound) { return next() % bound; }

    // Uniform in [0, 1).
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; avoids the implementation-defined
    // std::normal_distribution so embeddings reproduce across toolchains.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 == 0.0) u1 = next_unit();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace ethtrust
