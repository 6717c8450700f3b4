#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gtd/functionals.hpp"

namespace gtd {

class GridOverflow : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GridExhausted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// (x_1, v_1, ..., x_i, v_i) with v non-decreasing in [0, 1].
struct History {
    std::vector<double> x;
    std::vector<double> v;

    std::size_t stage() const noexcept { return x.size(); }
    History extended(double xn, double vn) const;
};

/// A history moved onto the solver's grids. x_j becomes X_j·h (nearest node,
/// clamped to [0, X_max]); v_j becomes the largest point of the stage grid
/// v̂_{j-1} + k(1 − v̂_{j-1})/G not above it. `key` interleaves X_j and k_j.
struct SnappedHistory {
    std::vector<long> key;
    History point;

    std::size_t stage() const noexcept { return point.stage(); }
    double last_v() const noexcept { return point.v.empty() ? 0.0 : point.v.back(); }
    long last_X() const noexcept { return key.empty() ? 0 : key[key.size() - 2]; }
};

/// Backward induction for U^e_i and U^m_i on snapped histories, memoized.
///
/// U^e_N = U. For i < N, U^m_i(H, x) is the maximum over the stage grid of
/// U^e_{i+1}(H + (x, v)); U^e_i(H) equals U^m_i(H, x_i) when v_i = 1 and otherwise
/// the expectation of U^m_i(H, ξ) for ξ the absorbed Brownian motion started at
/// x_i after quadratic variation S/N, with U^m_i linear between walk-grid nodes.
/// Safe to share between threads.
class Solver {
public:
    Solver(TerminalFunction U, ExperimentParams params);

    const TerminalFunction& terminal() const noexcept { return U_; }
    const ExperimentParams& params() const noexcept { return params_; }
    double step() const noexcept { return h_; }

    SnappedHistory snap(const History& history) const;

    /// Candidate next times after a stage ending at v_last: G+1 points, or {1}.
    std::vector<double> v_grid(double v_last) const;

    double value_e(const History& history);
    double value_m(const History& history, double x);
    double value_e0();

    /// U^e_{i+1}(Ĥ + (x, v)) for each v in v_grid(v̂_i); x off the grid is
    /// interpolated between nodes, except at the last stage where U is exact.
    std::vector<double> stage_values(const History& history, double x);

    struct Row {
        std::vector<double> value;  // U^m_i(Ĥ, X·h), X = 0..X_max
        std::vector<double> bound;  // error bound carried by each entry
    };
    std::shared_ptr<const Row> m_row(const History& history);

    /// Error bound attached to value_e0: v-grid mesh via lip_v plus interpolation
    /// and truncation estimates, propagated through every stage.
    double tolerance();

    /// Bound attached to value_e(history).
    double bound_e(const History& history);

    void set_threads(int threads) noexcept { threads_ = threads; }
    std::size_t cache_size() const;

private:
    struct Node {
        double value = 0.0;
        double bound = 0.0;
    };

    Node node_e(const SnappedHistory& h);
    std::shared_ptr<const Row> row_m(const SnappedHistory& h);
    SnappedHistory child(const SnappedHistory& h, long X, int k) const;
    double terminal_at(const SnappedHistory& h, double x, double v) const;
    Node integrate(const Row& row, double x) const;

    TerminalFunction U_;
    ExperimentParams params_;
    double h_;
    int threads_ = 1;

    mutable std::mutex mutex_;
    std::map<std::vector<long>, Node> e_cache_;
    std::map<std::vector<long>, std::shared_ptr<const Row>> m_cache_;
};

/// Values of the absorbed ±1 walk: entry(X, L) is the terminal row and
/// entry(X, j) = ½[entry(X−1, j+1) + entry(X+1, j+1)] for X > 0, entry(0, j) = entry(0, j+1).
/// Entries with X > X_max − (L − j) depend on nodes outside the row and are NaN.
class WalkTable {
public:
    WalkTable() = default;
    WalkTable(int L, long X_max, double step);

    int L() const noexcept { return L_; }
    long X_max() const noexcept { return X_max_; }
    double step() const noexcept { return step_; }
    bool valid(long X, int j) const noexcept { return X >= 0 && j >= 0 && j <= L_ && X <= X_max_ - (L_ - j); }

    double operator()(long X, int j) const;
    double& at(long X, int j) { return data_[index(X, j)]; }

    /// Stage and snapped history key this table was built for (empty for raw rows).
    int stage = 0;
    std::vector<long> history_key;

private:
    std::size_t index(long X, int j) const {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(X_max_ + 1) + static_cast<std::size_t>(X);
    }
    int L_ = 0;
    long X_max_ = 0;
    double step_ = 1.0;
    std::vector<double> data_;
};

WalkTable build_walk_table(std::span<const double> terminal_row, int L, double step);

/// Table with terminal row U^m_i(Ĥ, X·h). Requires v̂_i < 1.
WalkTable build_walk_table(Solver& solver, const History& history);

void save_walk_table_csv(const WalkTable& table, const std::string& filename);

struct AlwaysReport {
    double dp_value = 0.0;
    double walk_value = 0.0;
    double gap = 0.0;
    double bound = 0.0;  // g(ε) = f(ε) + 3Cε/√(S/N)
    bool exceeded = false;
};

/// Compares U^e_i(Ĥ) with the walk table entry at (X̂_i, 0).
AlwaysReport check_always(Solver& solver, const History& history);

/// g(ε) = f(ε) + 3Cε/√(S/N).
double walk_bound(const TerminalFunction& U, const ExperimentParams& params);

}  // namespace gtd
