#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "gtd/dp.hpp"
#include "gtd/paths.hpp"
#include "gtd/stochastics.hpp"

namespace gtd {

/// Near-optimal choices used to build the martingale measure.
///
/// next_v(H, x) is the smallest interior grid time whose continuation value is
/// within ε of the stage maximum; when no interior point qualifies the interior
/// maximiser is used and the shortfall is counted. v_star(H) sits halfway between
/// v_i and the ε-quantile of next_v(H, ξ) over a seeded sample of absorbed ξ.
class ChoiceTables {
public:
    static constexpr int kDefaultQuantileSamples = 10000;

    ChoiceTables(Solver& solver, std::uint64_t seed, int quantile_samples = kDefaultQuantileSamples);

    struct Choice {
        double v = 1.0;
        int k = 0;
        double value = 0.0;      // U^e_{i+1} at the chosen v
        double stage_max = 0.0;  // max over the whole grid
        bool shortfall = false;
    };

    Choice next_v(const History& history, double x) const;
    double v_star(const History& history);

    Solver& solver() const noexcept { return solver_; }
    std::uint64_t seed() const noexcept { return seed_; }
    int quantile_samples() const noexcept { return quantile_samples_; }
    std::size_t shortfalls() const noexcept;

private:
    Solver& solver_;
    std::uint64_t seed_;
    int quantile_samples_;
    mutable std::mutex mutex_;
    std::map<std::vector<long>, double> v_star_;
    mutable std::size_t shortfalls_ = 0;
};

ChoiceTables make_choice_tables(Solver& solver, std::uint64_t seed,
                                int quantile_samples = ChoiceTables::kDefaultQuantileSamples);

enum class Termination { Completed, Absorbed, TimeExhausted };

std::string to_string(Termination reason);

struct MeasureSample {
    Path path;
    std::vector<double> v;       // v_1..v_N
    std::vector<double> v_star;  // v*_0..v*_{N-1}; NaN for stages never started
    std::vector<double> x;       // x_1..x_N
    Termination reason = Termination::Completed;
    int stages_run = 0;
};

struct SamplerOptions {
    int n_steps = 1024;  // knots per Brownian piece
};

/// One path: per stage a piece of quadratic variation S/N − Δ on [v_i, v*_i] and a
/// piece of quadratic variation Δ on [v*_i, v_{i+1}], each stopped at 0, then flat
/// on [v_N, 1].
MeasureSample sample_measure_path(RngStream& rng, ChoiceTables& tables, const SamplerOptions& options = {});

struct Estimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    long count = 0;
};

Estimate mean_and_stderr(const std::vector<double>& values);

/// E_P[F_N] over M samples; sample m uses stream m of `seed`.
Estimate estimate_EP(ChoiceTables& tables, long M, std::uint64_t seed, int threads,
                     const SamplerOptions& options = {});

void save_bookkeeping_csv(const std::vector<MeasureSample>& samples, const std::string& filename);

}  // namespace gtd
