#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace sbridge {

// Deterministic cross-platform stream: mt19937_64 output is specified by the
// standard, and doubles are derived with a fixed 53-bit ladder instead of
// std::uniform_real_distribution (whose mapping is implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int sample_index(const Eigen::VectorXd& probs) {
        double u = uniform();
        double acc = 0.0;
        for (Eigen::Index i = 0; i < probs.size(); ++i) {
            acc += probs(i);
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(probs.size() - 1);
    }

    // independent child stream for replicate r (splitmix64 of seed and r)
    Rng spawn(std::uint64_t r) const {
        std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * (r + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return Rng(z ^ (z >> 31));
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace sbridge
