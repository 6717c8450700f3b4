#include "gtd/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/os.h>

#include "gtd/parallel.hpp"
#include "gtd/stochastics.hpp"

namespace gtd {

namespace {

constexpr std::uint64_t kQuantileDomain = 0x71756e74696c6573ULL;

std::uint64_t key_hash(const std::vector<long>& key) {
    std::uint64_t h = mix64(key.size());
    for (long k : key) h = hash_combine(h, static_cast<std::uint64_t>(k));
    return h;
}

}  // namespace

ChoiceTables::ChoiceTables(Solver& solver, std::uint64_t seed, int quantile_samples)
    : solver_(solver), seed_(seed), quantile_samples_(quantile_samples) {
    if (quantile_samples < 1) throw std::invalid_argument("ChoiceTables: quantile_samples must be positive");
}

ChoiceTables make_choice_tables(Solver& solver, std::uint64_t seed, int quantile_samples) {
    return ChoiceTables(solver, seed, quantile_samples);
}

std::size_t ChoiceTables::shortfalls() const noexcept {
    std::lock_guard lock(mutex_);
    return shortfalls_;
}

ChoiceTables::Choice ChoiceTables::next_v(const History& history, double x) const {
    const ExperimentParams& p = solver_.params();
    const SnappedHistory h = solver_.snap(history);
    if (p.G < 2 || h.last_v() >= 1.0) {
        throw GridExhausted("no grid time strictly between v_i and 1 (G = " + std::to_string(p.G) + ")");
    }
    const std::vector<double> grid = solver_.v_grid(h.last_v());
    const std::vector<double> values = solver_.stage_values(history, x);

    Choice c;
    c.stage_max = *std::max_element(values.begin(), values.end());
    const double target = c.stage_max - p.eps;
    int best = 1;
    for (int k = 1; k < p.G; ++k) {
        if (values[static_cast<std::size_t>(k)] >= target) {
            c.k = k;
            c.v = grid[static_cast<std::size_t>(k)];
            c.value = values[static_cast<std::size_t>(k)];
            return c;
        }
        if (values[static_cast<std::size_t>(k)] > values[static_cast<std::size_t>(best)]) best = k;
    }
    c.k = best;
    c.v = grid[static_cast<std::size_t>(best)];
    c.value = values[static_cast<std::size_t>(best)];
    c.shortfall = true;
    std::lock_guard lock(mutex_);
    ++shortfalls_;
    return c;
}

double ChoiceTables::v_star(const History& history) {
    const SnappedHistory h = solver_.snap(history);
    {
        std::lock_guard lock(mutex_);
        auto it = v_star_.find(h.key);
        if (it != v_star_.end()) return it->second;
    }
    const double x0 = h.stage() == 0 ? 1.0 : h.point.x.back();
    const AbsorbedTerminal law = absorbed_terminal(x0, solver_.params().stage_qv());
    RngStream rng(hash_combine(seed_, kQuantileDomain), key_hash(h.key));
    std::vector<double> picks(static_cast<std::size_t>(quantile_samples_));
    for (double& v : picks) v = next_v(h.point, law.sample(rng)).v;
    const auto rank = static_cast<std::size_t>(std::floor(solver_.params().eps * quantile_samples_));
    std::nth_element(picks.begin(), picks.begin() + static_cast<long>(rank), picks.end());
    const double q = picks[rank];
    const double vs = 0.5 * (h.last_v() + q);
    std::lock_guard lock(mutex_);
    return v_star_.emplace(h.key, vs).first->second;
}

std::string to_string(Termination reason) {
    switch (reason) {
        case Termination::Completed: return "completed";
        case Termination::Absorbed: return "absorbed";
        case Termination::TimeExhausted: return "time_exhausted";
    }
    return "unknown";
}

MeasureSample sample_measure_path(RngStream& rng, ChoiceTables& tables, const SamplerOptions& options) {
    Solver& solver = tables.solver();
    const ExperimentParams& p = solver.params();
    const auto N = static_cast<std::size_t>(p.N);
    const BmOptions bm{.exact_qv = true, .bridge_absorption = true};

    MeasureSample s;
    s.v.assign(N, 1.0);
    s.x.assign(N, 0.0);
    s.v_star.assign(N, std::numeric_limits<double>::quiet_NaN());

    std::vector<double> times{0.0};
    std::vector<double> values{1.0};
    auto append = [&](const PathPiece& piece) {
        times.insert(times.end(), piece.times.begin() + 1, piece.times.end());
        values.insert(values.end(), piece.values.begin() + 1, piece.values.end());
    };

    History history;
    double v_i = 0.0;
    double x_i = 1.0;
    bool done = false;
    for (std::size_t i = 0; i < N && !done; ++i) {
        s.stages_run = static_cast<int>(i) + 1;
        const double vs = tables.v_star(history);
        s.v_star[i] = vs;

        const PathPiece first = sample_scaled_bm(rng, x_i, p.stage_qv() - p.Delta, options.n_steps, v_i, vs, bm);
        append(first);
        if (first.absorbed) {
            s.reason = Termination::Absorbed;
            done = true;
            break;
        }
        const double y = first.values.back();
        const ChoiceTables::Choice choice = tables.next_v(history, y);
        const double v_next = choice.v > vs ? choice.v : 1.0;

        const PathPiece second = sample_scaled_bm(rng, y, p.Delta, options.n_steps, vs, v_next, bm);
        append(second);
        if (second.absorbed) {
            s.reason = Termination::Absorbed;
            done = true;
            break;
        }
        v_i = v_next;
        x_i = second.values.back();
        s.v[i] = v_i;
        s.x[i] = x_i;
        history = history.extended(x_i, v_i);
        if (v_i >= 1.0) {
            // Time ran out: the later checkpoints all sit at t = 1.
            for (std::size_t m = i + 1; m < N; ++m) s.x[m] = x_i;
            s.reason = Termination::TimeExhausted;
            done = true;
        }
    }
    if (times.back() < 1.0) {
        times.push_back(1.0);
        values.push_back(values.back());
    }
    s.path = make_path_unchecked(std::move(times), std::move(values));
    return s;
}

Estimate mean_and_stderr(const std::vector<double>& values) {
    Estimate e;
    e.count = static_cast<long>(values.size());
    if (values.empty()) return e;
    double sum = 0.0;
    for (double v : values) sum += v;
    e.mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return e;
    double ss = 0.0;
    for (double v : values) ss += (v - e.mean) * (v - e.mean);
    e.stderr_ = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
    return e;
}

Estimate estimate_EP(ChoiceTables& tables, long M, std::uint64_t seed, int threads, const SamplerOptions& options) {
    if (M < 2) throw std::invalid_argument("estimate_EP: need M >= 2");
    const TerminalFunction& U = tables.solver().terminal();
    const ExperimentParams& p = tables.solver().params();
    std::vector<double> payoff(static_cast<std::size_t>(M));
    parallel_for(payoff.size(), threads, [&](std::size_t m) {
        RngStream rng(seed, m);
        const MeasureSample s = sample_measure_path(rng, tables, options);
        payoff[m] = eval_FN(U, p, s.path);
    });
    return mean_and_stderr(payoff);
}

void save_bookkeeping_csv(const std::vector<MeasureSample>& samples, const std::string& filename) {
    auto out = fmt::output_file(filename);
    out.print("sample,stage,v,v_star,x,termination\n");
    for (std::size_t m = 0; m < samples.size(); ++m) {
        const MeasureSample& s = samples[m];
        for (std::size_t i = 0; i < s.v.size(); ++i) {
            out.print("{},{},{:.17g},{:.17g},{:.17g},{}\n", m, i + 1, s.v[i], s.v_star[i], s.x[i], to_string(s.reason));
        }
    }
}

}  // namespace gtd
