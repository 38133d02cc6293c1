#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "stopbridge/kernel_synthesis.hpp"

namespace stopbridge {

/// First-arrival counts of N simulated walkers.
struct EmpiricalLaw {
    int num_absorbing = 0;
    int horizon = 0;
    std::vector<std::uint64_t> counts;           // row-major m x t
    std::vector<std::uint64_t> residual_counts;  // transient state at the horizon
    std::uint64_t N = 0;
    std::uint64_t seed = 0;

    std::uint64_t count(int j, int tau) const {
        return counts[static_cast<std::size_t>(j) * horizon + (tau - 1)];
    }
    /// counts / N as an m x t matrix.
    Matrix frequencies() const;
    Vector residual_frequencies() const;
};

/// Counter-based stream: walker i of seed s always sees the same draws,
/// independent of how walkers are split across threads.
class WalkerRng {
public:
    WalkerRng(std::uint64_t seed, std::uint64_t walker);
    std::uint64_t next();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();

private:
    std::uint64_t state_;
};

/// Samples N walkers from mu0 through the stage kernels. `threads` = 0 uses
/// the hardware concurrency. Results do not depend on `threads`.
EmpiricalLaw sample_paths(int num_absorbing, std::span<const StageKernel> stages, const Vector& mu0,
                          std::uint64_t N, std::uint64_t seed, unsigned threads = 0);
EmpiricalLaw sample_paths(const PriorLaw& prior, const Vector& mu0, std::uint64_t N,
                          std::uint64_t seed, unsigned threads = 0);
EmpiricalLaw sample_paths(const Policy& policy, const Vector& mu0, std::uint64_t N,
                          std::uint64_t seed, unsigned threads = 0);

struct EmpiricalDistance {
    double linf = 0.0;
    double l1 = 0.0;
};

EmpiricalDistance empirical_distance(const EmpiricalLaw& emp, const Matrix& target);

}  // namespace stopbridge
