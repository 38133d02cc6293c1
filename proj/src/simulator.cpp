#include "stopbridge/simulator.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <thread>

namespace stopbridge {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Cumulative transition table for one stage over next-state global indices.
struct StageTable {
    int num_states = 0;
    std::vector<double> cumulative;  // n rows of m+n entries
    std::vector<double> totals;

    StageTable(const StageKernel& stage, int m) {
        const int n = static_cast<int>(stage.A.rows());
        num_states = m + n;
        cumulative.resize(static_cast<std::size_t>(n * num_states));
        totals.resize(static_cast<std::size_t>(n));
        for (int x = 0; x < n; ++x) {
            double acc = 0.0;
            for (int r = 0; r < num_states; ++r) {
                acc += r < m ? stage.B(x, r) : stage.A(x, r - m);
                cumulative[static_cast<std::size_t>(x * num_states + r)] = acc;
            }
            totals[static_cast<std::size_t>(x)] = acc;
        }
    }

    int draw(int x, double u) const {
        const auto* row = cumulative.data() + static_cast<std::size_t>(x) * num_states;
        const double target = u * totals[static_cast<std::size_t>(x)];
        int r = static_cast<int>(std::upper_bound(row, row + num_states, target) - row);
        if (r < num_states) return r;
        // u * total rounded onto the last boundary: take the last state with mass
        r = num_states - 1;
        while (r > 0 && row[r] == row[r - 1]) --r;
        return r;
    }
};

int draw_initial(const std::vector<double>& cumulative, double u) {
    const double target = u * cumulative.back();
    int x = static_cast<int>(std::upper_bound(cumulative.begin(), cumulative.end(), target) - cumulative.begin());
    if (x < static_cast<int>(cumulative.size())) return x;
    x = static_cast<int>(cumulative.size()) - 1;
    while (x > 0 && cumulative[static_cast<std::size_t>(x)] == cumulative[static_cast<std::size_t>(x - 1)]) --x;
    return x;
}

}  // namespace

WalkerRng::WalkerRng(std::uint64_t seed, std::uint64_t walker) {
    std::uint64_t s = seed;
    const std::uint64_t a = splitmix64(s);
    std::uint64_t w = walker ^ a;
    state_ = splitmix64(w) ^ splitmix64(s);
}

std::uint64_t WalkerRng::next() { return splitmix64(state_); }

double WalkerRng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

Matrix EmpiricalLaw::frequencies() const {
    Matrix out(num_absorbing, horizon);
    for (int j = 0; j < num_absorbing; ++j)
        for (int tau = 1; tau <= horizon; ++tau)
            out(j, tau - 1) = static_cast<double>(count(j, tau)) / static_cast<double>(N);
    return out;
}

Vector EmpiricalLaw::residual_frequencies() const {
    Vector out(static_cast<Eigen::Index>(residual_counts.size()));
    for (std::size_t x = 0; x < residual_counts.size(); ++x)
        out(static_cast<Eigen::Index>(x)) = static_cast<double>(residual_counts[x]) / static_cast<double>(N);
    return out;
}

EmpiricalLaw sample_paths(int num_absorbing, std::span<const StageKernel> stages, const Vector& mu0,
                          std::uint64_t N, std::uint64_t seed, unsigned threads) {
    if (N == 0) throw Error(ErrorKind::DimensionMismatch, "n", "sample count must be at least 1");
    const int m = num_absorbing;
    const int n = static_cast<int>(mu0.size());
    const int t = static_cast<int>(stages.size());

    std::vector<StageTable> tables;
    tables.reserve(stages.size());
    for (const auto& stage : stages) tables.emplace_back(stage, m);
    std::vector<double> initial(static_cast<std::size_t>(n));
    double acc = 0.0;
    for (int x = 0; x < n; ++x) initial[static_cast<std::size_t>(x)] = acc += mu0(x);

    EmpiricalLaw emp;
    emp.num_absorbing = m;
    emp.horizon = t;
    emp.N = N;
    emp.seed = seed;
    emp.counts.assign(static_cast<std::size_t>(m * t), 0);
    emp.residual_counts.assign(static_cast<std::size_t>(n), 0);

    auto run = [&](std::uint64_t begin, std::uint64_t end, std::vector<std::uint64_t>& counts,
                   std::vector<std::uint64_t>& residual) {
        for (std::uint64_t w = begin; w < end; ++w) {
            WalkerRng rng(seed, w);
            int x = draw_initial(initial, rng.uniform());  // transient index
            bool absorbed = false;
            for (int tau = 1; tau <= t; ++tau) {
                const int r = tables[static_cast<std::size_t>(tau - 1)].draw(x, rng.uniform());
                if (r < m) {
                    ++counts[static_cast<std::size_t>(r * t + tau - 1)];
                    absorbed = true;
                    break;
                }
                x = r - m;
            }
            if (!absorbed) ++residual[static_cast<std::size_t>(x)];
        }
    };

    unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
    workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, N));
    std::vector<std::vector<std::uint64_t>> part_counts(workers, emp.counts);
    std::vector<std::vector<std::uint64_t>> part_residual(workers, emp.residual_counts);
    {
        std::vector<std::jthread> pool;
        const std::uint64_t chunk = (N + workers - 1) / workers;
        for (unsigned k = 0; k < workers; ++k) {
            const std::uint64_t begin = std::min<std::uint64_t>(N, k * chunk);
            const std::uint64_t end = std::min<std::uint64_t>(N, begin + chunk);
            pool.emplace_back([&, k, begin, end] { run(begin, end, part_counts[k], part_residual[k]); });
        }
    }
    for (unsigned k = 0; k < workers; ++k) {
        for (std::size_t i = 0; i < emp.counts.size(); ++i) emp.counts[i] += part_counts[k][i];
        for (std::size_t i = 0; i < emp.residual_counts.size(); ++i)
            emp.residual_counts[i] += part_residual[k][i];
    }
    return emp;
}

EmpiricalLaw sample_paths(const PriorLaw& prior, const Vector& mu0, std::uint64_t N, std::uint64_t seed,
                          unsigned threads) {
    return sample_paths(prior.space.num_absorbing(), std::span<const StageKernel>(prior.stages), mu0, N,
                        seed, threads);
}

EmpiricalLaw sample_paths(const Policy& policy, const Vector& mu0, std::uint64_t N, std::uint64_t seed,
                          unsigned threads) {
    return sample_paths(policy.space.num_absorbing(), std::span<const StageKernel>(policy.stages), mu0, N,
                        seed, threads);
}

EmpiricalDistance empirical_distance(const EmpiricalLaw& emp, const Matrix& target) {
    if (target.rows() != emp.num_absorbing || target.cols() != emp.horizon)
        throw Error(ErrorKind::DimensionMismatch, "target",
                    fmt::format("target is {}x{}, counts are {}x{}", target.rows(), target.cols(),
                                emp.num_absorbing, emp.horizon));
    const Matrix diff = (emp.frequencies() - target).cwiseAbs();
    return EmpiricalDistance{diff.size() ? diff.maxCoeff() : 0.0, diff.sum()};
}

}  // namespace stopbridge
