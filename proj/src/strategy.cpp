#include "gtd/strategy.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/beta.hpp>
#include <fmt/format.h>
#include <fmt/os.h>

#include "gtd/functionals.hpp"
#include "gtd/parallel.hpp"

namespace gtd {

std::string to_string(EventType type) {
    switch (type) {
        case EventType::Bet: return "bet";
        case EventType::WindowStart: return "window_start";
        case EventType::GridHit: return "grid_hit";
        case EventType::CallOff: return "call_off";
        case EventType::Overflow: return "overflow";
        case EventType::Stop: return "stop";
        case EventType::Bankrupt: return "bankrupt";
    }
    return "unknown";
}

double StrategyRun::capital_at(double t) const {
    if (times.empty()) throw std::logic_error("capital_at: empty run");
    if (t <= times.front()) return capital.front();
    if (t >= times.back()) return capital.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const auto k = static_cast<std::size_t>(std::distance(times.begin(), it));
    const double t0 = times[k - 1];
    const double t1 = times[k];
    if (t1 == t0) return capital[k];
    const double w = (t - t0) / (t1 - t0);
    return capital[k - 1] + w * (capital[k] - capital[k - 1]);
}

namespace {

void check_schedule(const Schedule& schedule) {
    double prev = 0.0;
    for (const TradeEvent& e : schedule) {
        if (!(e.time >= 0.0 && e.time <= 1.0)) throw std::invalid_argument("schedule: event time outside [0, 1]");
        if (e.time < prev) throw std::invalid_argument("schedule: stopping times must be non-decreasing");
        if (!std::isfinite(e.bet) || std::abs(e.bet) > kMaxBet) {
            throw std::invalid_argument(fmt::format("schedule: unbounded bet {} at t = {}", e.bet, e.time));
        }
        prev = e.time;
    }
}

}  // namespace

StrategyRun run_schedule(double initial_capital, const Schedule& schedule, const Path& path) {
    if (!(initial_capital >= 0.0) || !std::isfinite(initial_capital)) {
        throw std::invalid_argument("run_capital: initial capital must be finite and >= 0");
    }
    check_schedule(schedule);
    const auto ts = path.times();
    const auto xs = path.values();

    StrategyRun run;
    run.times.push_back(0.0);
    run.capital.push_back(initial_capital);

    double position = 0.0;
    double entry_price = xs[0];
    double entry_capital = initial_capital;
    double t_cur = 0.0;
    std::size_t knot = 1;  // next knot strictly after t_cur

    // Moves the clock to t, marking capital at every knot passed; returns false on ruin.
    auto advance = [&](double t, double price_at_t) {
        auto mark = [&](double tk, double price) {
            const double K = entry_capital + position * (price - entry_price);
            if (K <= 0.0 && position != 0.0) {
                const double t_prev = run.times.back();
                const double K_prev = run.capital.back();
                const double w = K_prev > K ? K_prev / (K_prev - K) : 1.0;
                run.times.push_back(t_prev + w * (tk - t_prev));
                run.capital.push_back(0.0);
                run.bankrupt = true;
                return false;
            }
            run.times.push_back(tk);
            run.capital.push_back(K);
            return true;
        };
        while (knot < ts.size() && ts[knot] <= t_cur) ++knot;
        while (knot < ts.size() && ts[knot] < t) {
            if (!mark(ts[knot], xs[knot])) return false;
            ++knot;
        }
        t_cur = t;
        return mark(t, price_at_t);
    };

    for (const TradeEvent& e : schedule) {
        const double price = std::isnan(e.price) ? path(e.time) : e.price;
        if (!advance(e.time, price)) break;
        run.events.push_back({e, price, run.capital.back()});
        if (e.type == EventType::Stop) run.stopped_at_1_minus_eps = true;
        position = e.bet;
        entry_price = price;
        entry_capital = run.capital.back();
    }
    if (!run.bankrupt && t_cur < 1.0) advance(1.0, xs.back());
    if (run.bankrupt) {
        TradeEvent ruin;
        ruin.time = run.times.back();
        ruin.type = EventType::Bankrupt;
        run.events.push_back({ruin, path(ruin.time), 0.0});
        if (run.times.back() < 1.0) {
            run.times.push_back(1.0);
            run.capital.push_back(0.0);
        }
    }
    run.final_capital = run.capital.back();
    return run;
}

StrategyRun run_capital(const SimpleStrategy& strategy, const Path& path) {
    const Schedule schedule = strategy.plan ? strategy.plan(path) : Schedule{};
    return run_schedule(strategy.initial_capital, schedule, path);
}

double replay_final_capital(double initial_capital, const std::vector<LoggedEvent>& events, const Path& path) {
    double K = initial_capital;
    for (std::size_t n = 0; n < events.size(); ++n) {
        const double next = n + 1 < events.size() ? events[n + 1].price : path(1.0);
        K += events[n].event.bet * (next - events[n].price);
    }
    return K;
}

double hedge_slack_A(const TerminalFunction& U, const ExperimentParams& params) {
    return 3.0 * U.modulus(params.eps) + walk_bound(U, params);
}

double superhedge_margin(Solver& solver, const SuperhedgeConfig& config) {
    return config.margin_frac * solver.terminal().bound() + solver.tolerance();
}

SimpleStrategy build_superhedge(Solver& solver, const SuperhedgeConfig& config) {
    SimpleStrategy strategy;
    strategy.initial_capital = solver.value_e0() + superhedge_margin(solver, config);
    Solver* s = &solver;
    strategy.plan = [s](const Path& path) {
        const ExperimentParams& p = s->params();
        const double h = s->step();
        const double end = 1.0 - p.eps;
        const Checkpoints cp = checkpoints(path, p.S, p.N);

        Schedule schedule;
        History history;
        double v_i = 0.0;
        for (int i = 0; i < p.N; ++i) {
            if (i > 0) history = history.extended(cp.x[static_cast<std::size_t>(i - 1)], cp.v[static_cast<std::size_t>(i - 1)]);
            v_i = i == 0 ? 0.0 : cp.v[static_cast<std::size_t>(i - 1)];
            if (v_i >= end) break;
            const double window_end = std::min(cp.v[static_cast<std::size_t>(i)], end);

            TradeEvent start;
            start.time = v_i;
            start.type = EventType::WindowStart;
            start.window = i;
            schedule.push_back(start);

            const GridHits hits = grid_hitting_times(path, v_i, window_end, h);
            if (hits.times.empty() || hits.times.front() >= window_end) continue;
            if (hits.levels.front() > p.X_max - p.L) {
                TradeEvent flag;
                flag.time = hits.times.front();
                flag.type = EventType::Overflow;
                flag.window = i;
                flag.X = hits.levels.front();
                schedule.push_back(flag);
                continue;
            }
            const WalkTable table = build_walk_table(*s, history);
            for (std::size_t j = 0; j < hits.times.size() && hits.times[j] < window_end; ++j) {
                TradeEvent e;
                e.time = hits.times[j];
                e.window = i;
                e.j = static_cast<int>(j);
                e.X = hits.levels[j];
                e.price = static_cast<double>(e.X) * h;
                if (e.j >= p.L) {
                    e.type = EventType::CallOff;
                    schedule.push_back(e);
                    break;
                }
                e.type = EventType::GridHit;
                e.bet = e.X == 0 ? 0.0 : (table(e.X + 1, e.j + 1) - table(e.X, e.j)) / h;
                schedule.push_back(e);
            }
        }
        TradeEvent stop;
        stop.time = end;
        stop.type = EventType::Stop;
        schedule.push_back(stop);
        return schedule;
    };
    return strategy;
}

BinomialInterval clopper_pearson(long successes, long trials, double confidence) {
    if (trials <= 0 || successes < 0 || successes > trials) throw std::invalid_argument("clopper_pearson: bad counts");
    const double alpha = 1.0 - confidence;
    const auto k = static_cast<double>(successes);
    const auto n = static_cast<double>(trials);
    BinomialInterval ci;
    ci.lo = successes == 0 ? 0.0 : boost::math::ibeta_inv(k, n - k + 1.0, alpha / 2.0);
    ci.hi = successes == trials ? 1.0 : boost::math::ibeta_inv(k + 1.0, n - k, 1.0 - alpha / 2.0);
    return ci;
}

SuperhedgeReport verify_superhedge(const SimpleStrategy& strategy, const TerminalFunction& U,
                                   const ExperimentParams& params, const std::vector<Path>& paths, int threads) {
    if (paths.empty()) throw std::invalid_argument("verify_superhedge: empty path set");
    SuperhedgeReport report;
    report.paths = static_cast<long>(paths.size());
    report.NA = params.N * hedge_slack_A(U, params);
    report.initial_capital = strategy.initial_capital;
    report.threshold = 1.0 - 2.0 * params.N * params.eps;

    std::vector<double> slack(paths.size());
    std::vector<char> bankrupt(paths.size());
    std::vector<long> overflow(paths.size());
    parallel_for(paths.size(), threads, [&](std::size_t m) {
        const StrategyRun run = run_capital(strategy, paths[m]);
        const double K = run.capital_at(1.0 - params.eps);
        slack[m] = K - (eval_FN(U, params, paths[m]) - report.NA);
        bankrupt[m] = run.bankrupt;
        overflow[m] = std::count_if(run.events.begin(), run.events.end(),
                                    [](const LoggedEvent& e) { return e.event.type == EventType::Overflow; });
    });
    report.success.resize(paths.size());
    report.worst_slack = slack.front();
    for (std::size_t m = 0; m < paths.size(); ++m) {
        report.success[m] = slack[m] >= -1e-12;
        report.successes += report.success[m];
        report.bankrupt += bankrupt[m];
        report.overflow_windows += overflow[m];
        report.worst_slack = std::min(report.worst_slack, slack[m]);
    }
    report.rate = static_cast<double>(report.successes) / static_cast<double>(report.paths);
    report.ci = clopper_pearson(report.successes, report.paths);
    report.half_width = 0.5 * (report.ci.hi - report.ci.lo);
    report.pass = report.rate >= report.threshold - report.half_width;
    return report;
}

Path synthetic_grid_walk(RngStream& rng, double step, double S, const SyntheticOptions& options) {
    if (!(step > 0.0) || !(S > 0.0)) throw std::invalid_argument("synthetic_grid_walk: need step > 0 and S > 0");
    std::vector<double> values{1.0};
    std::vector<double> weights;

    const double lo = std::floor(1.0 / step);
    const double hi = std::ceil(1.0 / step);
    long X = static_cast<long>(lo);
    double budget = options.qv_fraction * S;
    if (lo != hi) {
        X = (lo == 0.0 || rng.coin()) ? static_cast<long>(hi) : static_cast<long>(lo);
        const double d0 = static_cast<double>(X) * step - 1.0;
        budget -= d0 * d0;
        values.push_back(static_cast<double>(X) * step);
        weights.push_back(1.0);
    }
    const auto steps = static_cast<long>(std::floor(std::max(budget, 0.0) / (step * step) * (1.0 - 1e-12)));
    bool slow = rng.coin();
    for (long k = 0; k < steps && X > 0; ++k) {
        if (rng.uniform() < options.switch_prob) slow = !slow;
        X += rng.coin() ? 1 : -1;
        values.push_back(static_cast<double>(X) * step);
        weights.push_back(slow ? options.slow_factor : 1.0);
    }
    std::vector<double> times{0.0};
    double total = 0.0;
    for (double w : weights) total += w;
    double acc = 0.0;
    for (double w : weights) {
        acc += w;
        times.push_back(acc / total);
    }
    if (times.size() == 1) {
        times.push_back(1.0);
        values.push_back(1.0);
    }
    times.back() = 1.0;
    return make_path(std::move(times), std::move(values), AbsorptionPolicy::Strict);
}

std::vector<Path> synthetic_family(std::uint64_t seed, long count, double step, double S, const Modulus& f,
                                   const SyntheticOptions& options) {
    std::vector<Path> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0L)));
    for (long m = 0; m < count; ++m) {
        bool found = false;
        for (int attempt = 0; attempt < 100 && !found; ++attempt) {
            RngStream rng(seed, (static_cast<std::uint64_t>(m) << 8) | static_cast<std::uint64_t>(attempt));
            Path path = synthetic_grid_walk(rng, step, S, options);
            const RegularityFlags flags = check_regularity(path, S, f, 0.0);
            if (!flags.in_A1 && !flags.in_A2) {
                out.push_back(std::move(path));
                found = true;
            }
        }
        if (!found) throw std::runtime_error("synthetic_family: no regular path after 100 attempts");
    }
    return out;
}

void save_run_csv(const StrategyRun& run, const std::string& filename) {
    auto out = fmt::output_file(filename);
    out.print("time,event_type,X,bet,price,capital\n");
    for (const LoggedEvent& e : run.events) {
        out.print("{:.17g},{},{},{:.17g},{:.17g},{:.17g}\n", e.event.time, to_string(e.event.type), e.event.X,
                  e.event.bet, e.price, e.capital);
    }
}

}  // namespace gtd
