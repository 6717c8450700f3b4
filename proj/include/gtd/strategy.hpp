#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "gtd/dp.hpp"
#include "gtd/paths.hpp"
#include "gtd/stochastics.hpp"

namespace gtd {

enum class EventType { Bet, WindowStart, GridHit, CallOff, Overflow, Stop, Bankrupt };

std::string to_string(EventType type);

/// A stopping time together with the stake held from it until the next event.
/// `price` pins ω(time) when it is known exactly (grid hits); NaN means read the path.
struct TradeEvent {
    double time = 0.0;
    double bet = 0.0;
    EventType type = EventType::Bet;
    double price = std::numeric_limits<double>::quiet_NaN();
    int window = -1;
    int j = -1;
    long X = -1;
};

using Schedule = std::vector<TradeEvent>;

/// Initial capital plus a rule turning a path into its stopping times and stakes.
/// Planners must only use ω on [0, τ_n] when choosing the n-th event.
struct SimpleStrategy {
    double initial_capital = 0.0;
    std::function<Schedule(const Path&)> plan;
};

inline constexpr double kMaxBet = 1e12;

struct LoggedEvent {
    TradeEvent event;
    double price = 0.0;
    double capital = 0.0;  // capital at the event time, before the new stake applies
};

struct StrategyRun {
    std::vector<LoggedEvent> events;
    std::vector<double> times;    // every path knot and event time
    std::vector<double> capital;  // capital at those times
    bool bankrupt = false;
    bool stopped_at_1_minus_eps = false;
    bool superhedged = false;
    double final_capital = 0.0;

    /// Capital at t; linear between recorded points, which is exact.
    double capital_at(double t) const;
};

/// K_t = c + Σ h_n (ω(τ_{n+1} ∧ t) − ω(τ_n ∧ t)), with the position closed once the
/// capital reaches 0. Throws std::invalid_argument on decreasing times or stakes that
/// are not finite or exceed kMaxBet.
StrategyRun run_capital(const SimpleStrategy& strategy, const Path& path);
StrategyRun run_schedule(double initial_capital, const Schedule& schedule, const Path& path);

/// Recomputes K_1 from the event log alone (no bankruptcy handling).
double replay_final_capital(double initial_capital, const std::vector<LoggedEvent>& events, const Path& path);

struct SuperhedgeConfig {
    double margin_frac = 0.05;  // margin = margin_frac·C + solver tolerance
};

/// Within each window [v_i, v_{i+1}) bets at the grid hits T_{i,j} (grid step h)
/// the stake [Ū_i(X+1, j+1) − Ū_i(X, j)]/h, with zero stakes at v_i, at X = 0 and
/// from j = L on; stops at 1 − ε. A window whose first level exceeds X_max − L is
/// flagged and left untraded.
SimpleStrategy build_superhedge(Solver& solver, const SuperhedgeConfig& config = {});

double superhedge_margin(Solver& solver, const SuperhedgeConfig& config = {});

/// A = 3f(ε) + g(ε).
double hedge_slack_A(const TerminalFunction& U, const ExperimentParams& params);

struct BinomialInterval {
    double lo = 0.0;
    double hi = 1.0;
};

/// Clopper–Pearson interval at the given two-sided confidence.
BinomialInterval clopper_pearson(long successes, long trials, double confidence = 0.95);

struct SuperhedgeReport {
    long paths = 0;
    long successes = 0;
    long bankrupt = 0;
    long overflow_windows = 0;
    double rate = 0.0;
    BinomialInterval ci;
    double half_width = 0.0;
    double threshold = 0.0;  // 1 − 2Nε
    double NA = 0.0;
    double initial_capital = 0.0;
    double worst_slack = 0.0;  // min over paths of K_{1−ε} − (F_N − N·A)
    bool pass = false;
    std::vector<char> success;
};

/// Per path: K_{1−ε} ≥ F_N(ω) − N·A. Passes when the success rate is at least
/// 1 − 2Nε minus the interval half-width.
SuperhedgeReport verify_superhedge(const SimpleStrategy& strategy, const TerminalFunction& U,
                                   const ExperimentParams& params, const std::vector<Path>& paths, int threads);

struct SyntheticOptions {
    double switch_prob = 0.1;  // chance per step of changing volatility regime
    double slow_factor = 4.0;  // time per step in the slow regime relative to the fast one
    double qv_fraction = 1.0;  // fraction of S the walk may use
};

/// Path from 1 to a neighbouring level of step·ℕ₀, then ±step moves (absorbed at
/// 0) with regime-switching time spacing; total quadratic variation ≤ qv_fraction·S.
Path synthetic_grid_walk(RngStream& rng, double step, double S, const SyntheticOptions& options = {});

/// Synthetic walks that pass check_regularity with modulus f (retrying each slot up to 100 times).
std::vector<Path> synthetic_family(std::uint64_t seed, long count, double step, double S, const Modulus& f,
                                   const SyntheticOptions& options = {});

void save_run_csv(const StrategyRun& run, const std::string& filename);

}  // namespace gtd
