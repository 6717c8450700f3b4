#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gtd/functionals.hpp"
#include "gtd/measure.hpp"
#include "gtd/strategy.hpp"

namespace gtd {

struct RunConfig {
    ExperimentParams params;
    std::string terminal = "capped_max";
    double B = 2.0;
    std::uint64_t seed = 20240917;
    long M_measure = 100000;
    long M_strategy = 10000;
    long M_synthetic = 1000;
    long sample_count = 100;
    double margin_frac = 0.05;
    int n_steps = 1024;
    int quantile_samples = ChoiceTables::kDefaultQuantileSamples;
    double regularity_scale = 10.0;  // synthetic paths must respect f(δ) = scale·√δ
    long metric_pairs = 1000;
    double hausdorff_resolution = 1e-3;
    std::string path_file;
    std::string paths_dir;
    bool strict_paths = true;
    int threads = 0;
    std::string out_dir = "out";
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Applies one key=value setting; throws ConfigError for unknown keys or bad values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Reads `key = value` lines; blank lines and lines starting with # are ignored.
RunConfig load_config(const std::string& filename, RunConfig base = {});

/// Every setting (including derived parameters) as key/value text, in a fixed order.
std::vector<std::pair<std::string, std::string>> describe(const RunConfig& config);

/// Terminal function and finalized parameters for a config.
TerminalFunction make_terminal(const RunConfig& config);
RunConfig finalized(const RunConfig& config);

/// Independent seeds for the separate random streams of one run.
enum class SeedDomain : std::uint64_t { Choice = 1, MeasureEstimate = 2, StrategyPaths = 3, Synthetic = 4, Metrics = 5 };
std::uint64_t domain_seed(std::uint64_t master, SeedDomain domain);

/// Measure-sampled paths used for strategy checks; identical for cmd_sample, cmd_strategy and cmd_duality.
std::vector<MeasureSample> strategy_samples(ChoiceTables& tables, const RunConfig& config, long count);

struct DpReport {
    double Ue0 = 0.0;
    double tolerance = 0.0;
    std::vector<std::pair<std::string, AlwaysReport>> always;
    bool pass = false;
};

struct DualityReport {
    std::string terminal;
    double C = 0.0;
    double Ue0 = 0.0;
    double tolerance = 0.0;
    Estimate EP;
    double margin = 0.0;
    double initial_capital = 0.0;
    SuperhedgeReport measure_hedge;
    SuperhedgeReport synthetic_hedge;
    double gap = 0.0;        // initial capital − E_P estimate
    double gap_limit = 0.0;  // 0.05·C + N(3C+3)ε + tolerance
    bool ordering = false;   // E_P − 4·stderr ≤ U^e_0 + tol and U^e_0 ≤ initial capital
    std::size_t shortfalls = 0;
    bool pass = false;
};

struct MetricReport {
    long pairs = 0;
    long hausdorff_vs_uniform_failures = 0;
    long uniform_symmetry_failures = 0;
    long uniform_triangle_failures = 0;
    long hausdorff_triangle_failures = 0;
    double worst_hausdorff_excess = 0.0;
    bool pass = false;
};

/// Random path with `knots` uniform-time knots and Gaussian moves, absorbed at 0.
Path random_test_path(RngStream& rng, int knots, double scale);

MetricReport metric_check(std::uint64_t seed, long pairs, double resolution, int threads);

DpReport run_dp(const RunConfig& config);
DualityReport run_duality(const RunConfig& config);

/// CLI entry points: write their artifacts into config.out_dir and return the exit
/// code (0 pass, 1 acceptance failure).
int cmd_dp(const RunConfig& config);
int cmd_duality(const RunConfig& config);
int cmd_sample(const RunConfig& config);
int cmd_strategy(const RunConfig& config);
int cmd_metrics(const RunConfig& config);

}  // namespace gtd
