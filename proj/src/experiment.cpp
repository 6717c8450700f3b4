#include "gtd/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/os.h>

#include "gtd/parallel.hpp"

namespace gtd {

namespace fs = std::filesystem;

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) throw ConfigError(fmt::format("config: bad value '{}' for {}", text, key));
    return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "strict") return true;
    if (text == "false" || text == "0" || text == "coerce") return false;
    throw ConfigError(fmt::format("config: bad value '{}' for {}", text, key));
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string num(double x) { return fmt::format("{:.10g}", x); }

void write_header(std::FILE* out, const RunConfig& config) {
    for (const auto& [key, value] : describe(config)) fmt::print(out, "# {}={}\n", key, value);
}

struct File {
    std::FILE* f;
    explicit File(const fs::path& p) : f(std::fopen(p.string().c_str(), "w")) {
        if (!f) throw std::runtime_error("cannot write " + p.string());
    }
    ~File() { std::fclose(f); }
    File(const File&) = delete;
    File& operator=(const File&) = delete;
};

fs::path prepare_out(const RunConfig& config) {
    fs::path dir(config.out_dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
    ExperimentParams& p = c.params;
    if (key == "S") p.S = parse_number<double>(key, value);
    else if (key == "N") p.N = parse_number<int>(key, value);
    else if (key == "L") p.L = parse_number<int>(key, value);
    else if (key == "eps") p.eps = parse_number<double>(key, value);
    else if (key == "G") p.G = parse_number<int>(key, value);
    else if (key == "Delta") p.Delta = parse_number<double>(key, value);
    else if (key == "X_max") p.X_max = parse_number<long>(key, value);
    else if (key == "terminal") c.terminal = value;
    else if (key == "B") c.B = parse_number<double>(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "M_measure") c.M_measure = parse_number<long>(key, value);
    else if (key == "M_strategy") c.M_strategy = parse_number<long>(key, value);
    else if (key == "M_synthetic") c.M_synthetic = parse_number<long>(key, value);
    else if (key == "sample_count") c.sample_count = parse_number<long>(key, value);
    else if (key == "margin_frac") c.margin_frac = parse_number<double>(key, value);
    else if (key == "n_steps") c.n_steps = parse_number<int>(key, value);
    else if (key == "quantile_samples") c.quantile_samples = parse_number<int>(key, value);
    else if (key == "regularity_scale") c.regularity_scale = parse_number<double>(key, value);
    else if (key == "metric_pairs") c.metric_pairs = parse_number<long>(key, value);
    else if (key == "hausdorff_resolution") c.hausdorff_resolution = parse_number<double>(key, value);
    else if (key == "path_file") c.path_file = value;
    else if (key == "paths_dir") c.paths_dir = value;
    else if (key == "strict_paths") c.strict_paths = parse_bool(key, value);
    else if (key == "threads") c.threads = parse_number<int>(key, value);
    else if (key == "out_dir") c.out_dir = value;
    else throw ConfigError("config: unknown key '" + key + "'");
}

RunConfig load_config(const std::string& filename, RunConfig base) {
    std::ifstream in(filename);
    if (!in) throw ConfigError("config: cannot open " + filename);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError(fmt::format("{}:{}: expected key=value", filename, lineno));
        apply_setting(base, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return base;
}

std::vector<std::pair<std::string, std::string>> describe(const RunConfig& c) {
    const ExperimentParams& p = c.params;
    return {
        {"terminal", c.terminal},
        {"B", num(c.B)},
        {"S", num(p.S)},
        {"N", std::to_string(p.N)},
        {"L", std::to_string(p.L)},
        {"eps", num(p.eps)},
        {"G", std::to_string(p.G)},
        {"Delta", num(p.Delta)},
        {"X_max", std::to_string(p.X_max)},
        {"step", num(p.step())},
        {"delta", num(p.delta_price)},
        {"seed", std::to_string(c.seed)},
        {"M_measure", std::to_string(c.M_measure)},
        {"M_strategy", std::to_string(c.M_strategy)},
        {"M_synthetic", std::to_string(c.M_synthetic)},
        {"sample_count", std::to_string(c.sample_count)},
        {"margin_frac", num(c.margin_frac)},
        {"n_steps", std::to_string(c.n_steps)},
        {"quantile_samples", std::to_string(c.quantile_samples)},
        {"regularity_scale", num(c.regularity_scale)},
        {"metric_pairs", std::to_string(c.metric_pairs)},
        {"hausdorff_resolution", num(c.hausdorff_resolution)},
        {"strict_paths", c.strict_paths ? "true" : "false"},
    };
}

TerminalFunction make_terminal(const RunConfig& config) {
    return builtin_terminal(config.terminal, config.B, config.params.N);
}

RunConfig finalized(const RunConfig& config) {
    RunConfig out = config;
    out.params.finalize(make_terminal(config));
    return out;
}

std::uint64_t domain_seed(std::uint64_t master, SeedDomain domain) {
    return hash_combine(master, static_cast<std::uint64_t>(domain));
}

std::vector<MeasureSample> strategy_samples(ChoiceTables& tables, const RunConfig& config, long count) {
    std::vector<MeasureSample> samples(static_cast<std::size_t>(std::max(count, 0L)));
    const std::uint64_t seed = domain_seed(config.seed, SeedDomain::StrategyPaths);
    const SamplerOptions options{config.n_steps};
    parallel_for(samples.size(), config.threads, [&](std::size_t m) {
        RngStream rng(seed, m);
        samples[m] = sample_measure_path(rng, tables, options);
    });
    return samples;
}

Path random_test_path(RngStream& rng, int knots, double scale) {
    if (knots < 2) throw std::invalid_argument("random_test_path: need at least 2 knots");
    std::vector<double> times(static_cast<std::size_t>(knots));
    std::vector<double> values(static_cast<std::size_t>(knots));
    times.front() = 0.0;
    times.back() = 1.0;
    for (int k = 1; k + 1 < knots; ++k) times[static_cast<std::size_t>(k)] = rng.uniform();
    std::sort(times.begin() + 1, times.end() - 1);
    values.front() = 1.0;
    const double sd = scale / std::sqrt(static_cast<double>(knots));
    for (std::size_t k = 1; k < values.size(); ++k) {
        values[k] = values[k - 1] <= 0.0 ? 0.0 : std::max(0.0, values[k - 1] + sd * rng.normal());
    }
    // Coincident uniforms would break strict monotonicity; nudge them apart.
    for (std::size_t k = 1; k < times.size(); ++k) {
        if (times[k] <= times[k - 1]) times[k] = std::nextafter(times[k - 1], 2.0);
    }
    times.back() = 1.0;
    return make_path(std::move(times), std::move(values), AbsorptionPolicy::Coerce);
}

MetricReport metric_check(std::uint64_t seed, long pairs, double resolution, int threads) {
    MetricReport report;
    report.pairs = pairs;
    struct Row {
        bool hu = false, us = false, ut = false, ht = false;
        double excess = 0.0;
    };
    std::vector<Row> rows(static_cast<std::size_t>(std::max(pairs, 0L)));
    parallel_for(rows.size(), threads, [&](std::size_t m) {
        RngStream rng(seed, m);
        auto draw = [&] { return random_test_path(rng, 2 + static_cast<int>(rng.uniform() * 60), 0.5 + rng.uniform()); };
        const Path a = draw();
        const Path b = draw();
        const Path c = draw();
        const double uab = uniform_distance(a, b);
        const double uba = uniform_distance(b, a);
        const double ubc = uniform_distance(b, c);
        const double uac = uniform_distance(a, c);
        const double hab = hausdorff_distance(a, b, resolution);
        const double hbc = hausdorff_distance(b, c, resolution);
        const double hac = hausdorff_distance(a, c, resolution);
        Row& r = rows[m];
        r.excess = hab - uab;
        r.hu = hab > uab + resolution;
        r.us = uab != uba;
        r.ut = uac > uab + ubc;
        r.ht = hac > hab + hbc + 2.0 * resolution;
    });
    for (const Row& r : rows) {
        report.hausdorff_vs_uniform_failures += r.hu;
        report.uniform_symmetry_failures += r.us;
        report.uniform_triangle_failures += r.ut;
        report.hausdorff_triangle_failures += r.ht;
        report.worst_hausdorff_excess = std::max(report.worst_hausdorff_excess, r.excess);
    }
    report.pass = report.hausdorff_vs_uniform_failures == 0 && report.uniform_symmetry_failures == 0 &&
                  report.uniform_triangle_failures == 0 && report.hausdorff_triangle_failures == 0;
    return report;
}

DpReport run_dp(const RunConfig& config) {
    const TerminalFunction U = make_terminal(config);
    ExperimentParams p = config.params;
    p.finalize(U);
    Solver solver(U, p);
    solver.set_threads(config.threads);

    DpReport report;
    report.Ue0 = solver.value_e0();
    report.tolerance = solver.tolerance();
    report.always.emplace_back("stage0", check_always(solver, History{}));
    if (p.N >= 2) {
        for (double v : {0.25, 0.5}) {
            for (double x : {0.5, 1.0, 1.5}) {
                History h;
                h.x = {x};
                h.v = {v};
                report.always.emplace_back(fmt::format("stage1 x={} v={}", x, v), check_always(solver, h));
            }
        }
    }
    report.pass = report.Ue0 >= 0.0 && report.Ue0 <= U.bound() + 1e-12;
    for (const auto& [name, a] : report.always) report.pass = report.pass && !a.exceeded;
    return report;
}

DualityReport run_duality(const RunConfig& config) {
    const TerminalFunction U = make_terminal(config);
    ExperimentParams p = config.params;
    p.finalize(U);
    Solver solver(U, p);
    solver.set_threads(config.threads);

    DualityReport r;
    r.terminal = config.terminal;
    r.C = U.bound();
    r.Ue0 = solver.value_e0();
    r.tolerance = solver.tolerance();

    ChoiceTables tables(solver, domain_seed(config.seed, SeedDomain::Choice), config.quantile_samples);
    const SamplerOptions options{config.n_steps};
    r.EP = estimate_EP(tables, config.M_measure, domain_seed(config.seed, SeedDomain::MeasureEstimate),
                       config.threads, options);

    const SimpleStrategy strategy = build_superhedge(solver, {config.margin_frac});
    r.margin = superhedge_margin(solver, {config.margin_frac});
    r.initial_capital = strategy.initial_capital;

    RunConfig sampling = config;
    sampling.params = p;
    const std::vector<MeasureSample> samples = strategy_samples(tables, sampling, config.M_strategy);
    std::vector<Path> paths;
    paths.reserve(samples.size());
    for (const MeasureSample& s : samples) paths.push_back(s.path);
    if (!paths.empty()) r.measure_hedge = verify_superhedge(strategy, U, p, paths, config.threads);
    else r.measure_hedge.pass = true;

    if (config.M_synthetic > 0) {
        const double scale = config.regularity_scale;
        const std::vector<Path> synthetic =
            synthetic_family(domain_seed(config.seed, SeedDomain::Synthetic), config.M_synthetic, p.step(), p.S,
                             [scale](double d) { return scale * std::sqrt(d); });
        r.synthetic_hedge = verify_superhedge(strategy, U, p, synthetic, config.threads);
    } else {
        r.synthetic_hedge.pass = true;
    }

    r.shortfalls = tables.shortfalls();
    r.gap = r.initial_capital - r.EP.mean;
    r.gap_limit = config.margin_frac * r.C + p.N * (3.0 * r.C + 3.0) * p.eps + r.tolerance;
    r.ordering = r.EP.mean - 4.0 * r.EP.stderr_ <= r.Ue0 + r.tolerance && r.Ue0 <= r.initial_capital;
    r.pass = r.gap <= r.gap_limit && r.ordering && r.measure_hedge.pass && r.synthetic_hedge.pass;
    return r;
}

int cmd_dp(const RunConfig& config) {
    const RunConfig c = finalized(config);
    const DpReport report = run_dp(c);
    const fs::path dir = prepare_out(c);
    {
        File out(dir / "dp_report.csv");
        write_header(out.f, c);
        fmt::print(out.f, "name,dp_value,walk_value,gap,bound,exceeded\n");
        fmt::print(out.f, "Ue0,{:.12g},,,{:.6g},\n", report.Ue0, report.tolerance);
        for (const auto& [name, a] : report.always) {
            fmt::print(out.f, "{},{:.12g},{:.12g},{:.6g},{:.6g},{}\n", name, a.dp_value, a.walk_value, a.gap, a.bound,
                       a.exceeded ? 1 : 0);
        }
    }
    {
        const TerminalFunction U = make_terminal(c);
        Solver solver(U, c.params);
        save_walk_table_csv(build_walk_table(solver, History{}), (dir / "walk_table_stage0.csv").string());
    }
    File summary(dir / "summary.txt");
    fmt::print(summary.f, "command: dp\nterminal: {}\nUe0: {:.12g}\ntolerance: {:.6g}\nresult: {}\n", c.terminal,
               report.Ue0, report.tolerance, report.pass ? "PASS" : "FAIL");
    return report.pass ? 0 : 1;
}

int cmd_duality(const RunConfig& config) {
    const RunConfig c = finalized(config);
    const DualityReport r = run_duality(c);
    const fs::path dir = prepare_out(c);
    {
        File out(dir / "duality_report.csv");
        write_header(out.f, c);
        fmt::print(out.f, "quantity,value\n");
        fmt::print(out.f, "Ue0,{:.12g}\n", r.Ue0);
        fmt::print(out.f, "dp_tolerance,{:.6g}\n", r.tolerance);
        fmt::print(out.f, "EP_mean,{:.12g}\n", r.EP.mean);
        fmt::print(out.f, "EP_stderr,{:.6g}\n", r.EP.stderr_);
        fmt::print(out.f, "margin,{:.12g}\n", r.margin);
        fmt::print(out.f, "initial_capital,{:.12g}\n", r.initial_capital);
        fmt::print(out.f, "measure_success_rate,{:.12g}\n", r.measure_hedge.rate);
        fmt::print(out.f, "measure_ci_half_width,{:.6g}\n", r.measure_hedge.half_width);
        fmt::print(out.f, "synthetic_success_rate,{:.12g}\n", r.synthetic_hedge.rate);
        fmt::print(out.f, "synthetic_ci_half_width,{:.6g}\n", r.synthetic_hedge.half_width);
        fmt::print(out.f, "success_threshold,{:.6g}\n", r.measure_hedge.threshold);
        fmt::print(out.f, "bankrupt_paths,{}\n", r.measure_hedge.bankrupt + r.synthetic_hedge.bankrupt);
        fmt::print(out.f, "overflow_windows,{}\n", r.measure_hedge.overflow_windows + r.synthetic_hedge.overflow_windows);
        fmt::print(out.f, "choice_shortfalls,{}\n", r.shortfalls);
        fmt::print(out.f, "gap,{:.12g}\n", r.gap);
        fmt::print(out.f, "gap_limit,{:.12g}\n", r.gap_limit);
        fmt::print(out.f, "ordering,{}\n", r.ordering ? 1 : 0);
        fmt::print(out.f, "pass,{}\n", r.pass ? 1 : 0);
    }
    File summary(dir / "summary.txt");
    fmt::print(summary.f,
               "command: duality\nterminal: {}\nUe0: {:.6f} (tolerance {:.2e})\nE_P[F_N]: {:.6f} +- {:.6f}\n"
               "initial capital: {:.6f}\nsuperhedge success: measure {:.4f}, synthetic {:.4f} (threshold {:.4f})\n"
               "gap: {:.6f} (limit {:.6f})\nordering: {}\nresult: {}\n",
               r.terminal, r.Ue0, r.tolerance, r.EP.mean, r.EP.stderr_, r.initial_capital, r.measure_hedge.rate,
               r.synthetic_hedge.rate, r.measure_hedge.threshold, r.gap, r.gap_limit, r.ordering ? "ok" : "violated",
               r.pass ? "PASS" : "FAIL");
    return r.pass ? 0 : 1;
}

int cmd_sample(const RunConfig& config) {
    const RunConfig c = finalized(config);
    const TerminalFunction U = make_terminal(c);
    Solver solver(U, c.params);
    solver.set_threads(c.threads);
    ChoiceTables tables(solver, domain_seed(c.seed, SeedDomain::Choice), c.quantile_samples);
    const std::vector<MeasureSample> samples = strategy_samples(tables, c, c.sample_count);

    const fs::path dir = prepare_out(c);
    fs::create_directories(dir / "samples");
    File manifest(dir / "manifest.csv");
    write_header(manifest.f, c);
    fmt::print(manifest.f, "sample,file,termination,FN\n");
    for (std::size_t m = 0; m < samples.size(); ++m) {
        const std::string name = fmt::format("samples/path_{:06d}.csv", m);
        save_path_csv(samples[m].path, (dir / name).string());
        fmt::print(manifest.f, "{},{},{},{:.12g}\n", m, name, to_string(samples[m].reason),
                   eval_FN(U, c.params, samples[m].path));
    }
    save_bookkeeping_csv(samples, (dir / "bookkeeping.csv").string());
    File summary(dir / "summary.txt");
    fmt::print(summary.f, "command: sample\nterminal: {}\nsamples: {}\nchoice shortfalls: {}\n", c.terminal,
               samples.size(), tables.shortfalls());
    return 0;
}

namespace {

std::vector<Path> load_manifest(const RunConfig& c) {
    const fs::path dir(c.paths_dir);
    std::ifstream in(dir / "manifest.csv");
    if (!in) throw std::runtime_error("cannot open " + (dir / "manifest.csv").string());
    std::vector<Path> paths;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        std::stringstream ss(line);
        std::string index, file;
        std::getline(ss, index, ',');
        std::getline(ss, file, ',');
        paths.push_back(load_path_csv((dir / file).string(),
                                      c.strict_paths ? AbsorptionPolicy::Strict : AbsorptionPolicy::Coerce));
    }
    return paths;
}

}  // namespace

int cmd_strategy(const RunConfig& config) {
    const RunConfig c = finalized(config);
    const TerminalFunction U = make_terminal(c);
    Solver solver(U, c.params);
    solver.set_threads(c.threads);
    const SimpleStrategy strategy = build_superhedge(solver, {c.margin_frac});
    const fs::path dir = prepare_out(c);

    if (!c.path_file.empty()) {
        const Path path =
            load_path_csv(c.path_file, c.strict_paths ? AbsorptionPolicy::Strict : AbsorptionPolicy::Coerce);
        const StrategyRun run = run_capital(strategy, path);
        save_run_csv(run, (dir / "strategy_run.csv").string());
        const double K = run.capital_at(1.0 - c.params.eps);
        const double F = eval_FN(U, c.params, path);
        const double NA = c.params.N * hedge_slack_A(U, c.params);
        const bool ok = K >= F - NA - 1e-12;
        File summary(dir / "summary.txt");
        fmt::print(summary.f,
                   "command: strategy\npath: {}\ninitial capital: {:.6f}\nK(1-eps): {:.6f}\nF_N: {:.6f}\nN*A: {:.6f}\n"
                   "bankrupt: {}\nresult: {}\n",
                   c.path_file, strategy.initial_capital, K, F, NA, run.bankrupt ? "yes" : "no", ok ? "PASS" : "FAIL");
        return ok ? 0 : 1;
    }

    std::vector<Path> paths;
    if (!c.paths_dir.empty()) {
        paths = load_manifest(c);
    } else {
        ChoiceTables tables(solver, domain_seed(c.seed, SeedDomain::Choice), c.quantile_samples);
        for (MeasureSample& s : strategy_samples(tables, c, c.M_strategy)) paths.push_back(std::move(s.path));
    }
    if (paths.empty()) throw std::runtime_error("strategy: no paths to run");
    const SuperhedgeReport r = verify_superhedge(strategy, U, c.params, paths, c.threads);
    {
        File out(dir / "strategy_report.csv");
        write_header(out.f, c);
        fmt::print(out.f, "quantity,value\n");
        fmt::print(out.f, "paths,{}\nsuccesses,{}\nsuccess_rate,{:.12g}\nci_lo,{:.12g}\nci_hi,{:.12g}\n", r.paths,
                   r.successes, r.rate, r.ci.lo, r.ci.hi);
        fmt::print(out.f, "threshold,{:.6g}\nNA,{:.12g}\ninitial_capital,{:.12g}\nworst_slack,{:.12g}\n", r.threshold,
                   r.NA, r.initial_capital, r.worst_slack);
        fmt::print(out.f, "bankrupt,{}\noverflow_windows,{}\npass,{}\n", r.bankrupt, r.overflow_windows, r.pass ? 1 : 0);
    }
    save_run_csv(run_capital(strategy, paths.front()), (dir / "strategy_run_000000.csv").string());
    File summary(dir / "summary.txt");
    fmt::print(summary.f, "command: strategy\npaths: {}\nsuccess rate: {:.6f} [{:.6f}, {:.6f}]\nresult: {}\n", r.paths,
               r.rate, r.ci.lo, r.ci.hi, r.pass ? "PASS" : "FAIL");
    return r.pass ? 0 : 1;
}

int cmd_metrics(const RunConfig& config) {
    const MetricReport r =
        metric_check(domain_seed(config.seed, SeedDomain::Metrics), config.metric_pairs, config.hausdorff_resolution,
                     config.threads);
    const fs::path dir = prepare_out(config);
    {
        File out(dir / "metrics.csv");
        fmt::print(out.f, "# seed={}\n# metric_pairs={}\n# hausdorff_resolution={}\n", config.seed,
                   config.metric_pairs, num(config.hausdorff_resolution));
        fmt::print(out.f, "check,failures\n");
        fmt::print(out.f, "hausdorff_le_uniform_plus_resolution,{}\n", r.hausdorff_vs_uniform_failures);
        fmt::print(out.f, "uniform_symmetry,{}\n", r.uniform_symmetry_failures);
        fmt::print(out.f, "uniform_triangle,{}\n", r.uniform_triangle_failures);
        fmt::print(out.f, "hausdorff_triangle,{}\n", r.hausdorff_triangle_failures);
        fmt::print(out.f, "worst_hausdorff_minus_uniform,{:.6g}\n", r.worst_hausdorff_excess);
    }
    File summary(dir / "summary.txt");
    fmt::print(summary.f, "command: metrics\npairs: {}\nresult: {}\n", r.pairs, r.pass ? "PASS" : "FAIL");
    return r.pass ? 0 : 1;
}

}  // namespace gtd
