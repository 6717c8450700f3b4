#include "gtd/dp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>
#include <fmt/os.h>

#include "gtd/parallel.hpp"
#include "gtd/stochastics.hpp"

namespace gtd {

History History::extended(double xn, double vn) const {
    History out = *this;
    out.x.push_back(xn);
    out.v.push_back(vn);
    return out;
}

namespace {

double next_v(double v_prev, int k, int G) {
    if (v_prev >= 1.0 || k >= G) return 1.0;
    return v_prev + k * (1.0 - v_prev) / G;
}

}  // namespace

Solver::Solver(TerminalFunction U, ExperimentParams params) : U_(std::move(U)), params_(params) {
    params_.validate(U_);
    h_ = params_.step();
}

SnappedHistory Solver::snap(const History& history) const {
    if (history.x.size() != history.v.size()) throw std::invalid_argument("History: x and v differ in length");
    if (history.stage() > static_cast<std::size_t>(params_.N)) throw std::invalid_argument("History: longer than N");
    SnappedHistory s;
    double v_raw_prev = 0.0;
    double v_prev = 0.0;
    long X_prev = 0;
    for (std::size_t j = 0; j < history.stage(); ++j) {
        const double x = history.x[j];
        const double v = history.v[j];
        if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument("History: prices must be finite and >= 0");
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("History: times must lie in [0, 1]");
        if (v < v_raw_prev - 1e-12) throw std::invalid_argument("History: times must be non-decreasing");
        v_raw_prev = v;
        long X = 0;
        int k = params_.G;
        if (v_prev >= 1.0) {
            X = X_prev;
        } else {
            X = std::clamp<long>(std::lround(x / h_), 0, params_.X_max);
            const double r = (v - v_prev) / (1.0 - v_prev) * params_.G;
            k = std::clamp(static_cast<int>(std::floor(r + 1e-9)), 0, params_.G);
        }
        v_prev = next_v(v_prev, k, params_.G);
        X_prev = X;
        s.key.push_back(X);
        s.key.push_back(k);
        s.point.x.push_back(static_cast<double>(X) * h_);
        s.point.v.push_back(v_prev);
    }
    return s;
}

std::vector<double> Solver::v_grid(double v_last) const {
    if (v_last >= 1.0) return {1.0};
    std::vector<double> grid(static_cast<std::size_t>(params_.G) + 1);
    for (int k = 0; k <= params_.G; ++k) grid[static_cast<std::size_t>(k)] = next_v(v_last, k, params_.G);
    return grid;
}

SnappedHistory Solver::child(const SnappedHistory& h, long X, int k) const {
    SnappedHistory c = h;
    const double v_prev = h.last_v();
    if (!h.key.empty() && v_prev >= 1.0) {
        X = h.last_X();
        k = params_.G;
    }
    c.key.push_back(X);
    c.key.push_back(k);
    c.point.x.push_back(static_cast<double>(X) * h_);
    c.point.v.push_back(next_v(v_prev, k, params_.G));
    return c;
}

double Solver::terminal_at(const SnappedHistory& h, double x, double v) const {
    const std::size_t n = h.stage() + 1;
    std::vector<double> xs(n), vs(n);
    std::copy(h.point.x.begin(), h.point.x.end(), xs.begin());
    std::copy(h.point.v.begin(), h.point.v.end(), vs.begin());
    xs.back() = x;
    vs.back() = v;
    return U_(xs, vs);
}

Solver::Node Solver::integrate(const Row& row, double x) const {
    const double a = params_.stage_qv();
    const PiecewiseExpectation pe = absorbed_expectation_interpolated(row.value, h_, x, a);
    const PiecewiseExpectation eb = absorbed_expectation_interpolated(row.bound, h_, x, a);
    return {pe.value, pe.interpolation_bound + U_.bound() * pe.tail_mass + eb.value};
}

Solver::Node Solver::node_e(const SnappedHistory& h) {
    const auto stage = static_cast<int>(h.stage());
    if (stage == params_.N) return {U_(h.point.x, h.point.v), 0.0};
    {
        std::lock_guard lock(mutex_);
        auto it = e_cache_.find(h.key);
        if (it != e_cache_.end()) return it->second;
    }
    Node node;
    if (stage > 0 && h.last_v() >= 1.0) {
        node = node_e(child(h, h.last_X(), params_.G));
    } else {
        node = integrate(*row_m(h), stage == 0 ? 1.0 : h.point.x.back());
    }
    std::lock_guard lock(mutex_);
    return e_cache_.emplace(h.key, node).first->second;
}

std::shared_ptr<const Solver::Row> Solver::row_m(const SnappedHistory& h) {
    const auto stage = static_cast<int>(h.stage());
    if (stage >= params_.N) throw std::invalid_argument("m_row: history already complete");
    if (stage > 0 && h.last_v() >= 1.0) throw std::invalid_argument("m_row: needs v_i < 1");
    {
        std::lock_guard lock(mutex_);
        auto it = m_cache_.find(h.key);
        if (it != m_cache_.end()) return it->second;
    }
    const std::vector<double> grid = v_grid(h.last_v());
    const double mesh_term = U_.lip_v() * (1.0 - h.last_v()) / params_.G;
    const bool last_stage = stage == params_.N - 1;
    const auto n = static_cast<std::size_t>(params_.X_max) + 1;

    auto row = std::make_shared<Row>();
    row->value.resize(n);
    row->bound.resize(n);
    auto fill = [&](std::size_t X) {
        double best = -std::numeric_limits<double>::infinity();
        double worst_bound = 0.0;
        for (int k = 0; k <= params_.G; ++k) {
            const double v = grid[static_cast<std::size_t>(k)];
            if (last_stage) {
                best = std::max(best, terminal_at(h, static_cast<double>(X) * h_, v));
            } else {
                const Node c = node_e(child(h, static_cast<long>(X), k));
                best = std::max(best, c.value);
                worst_bound = std::max(worst_bound, c.bound);
            }
        }
        row->value[X] = best;
        row->bound[X] = worst_bound + mesh_term;
    };
    if (stage == 0 && !last_stage) {
        parallel_for(n, threads_, fill);
    } else {
        for (std::size_t X = 0; X < n; ++X) fill(X);
    }
    std::lock_guard lock(mutex_);
    return m_cache_.emplace(h.key, std::move(row)).first->second;
}

double Solver::value_e(const History& history) {
    if (history.stage() == 0) return value_e0();
    return node_e(snap(history)).value;
}

double Solver::bound_e(const History& history) { return node_e(snap(history)).bound; }

double Solver::value_e0() { return node_e(SnappedHistory{}).value; }

double Solver::tolerance() { return node_e(SnappedHistory{}).bound; }

std::vector<double> Solver::stage_values(const History& history, double x) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument("stage_values: x must be finite and >= 0");
    const SnappedHistory h = snap(history);
    const auto stage = static_cast<int>(h.stage());
    if (stage >= params_.N) throw std::invalid_argument("stage_values: history already complete");
    const std::vector<double> grid = v_grid(h.last_v());
    const bool frozen = stage > 0 && h.last_v() >= 1.0;
    if (frozen) x = h.point.x.back();

    std::vector<double> out(grid.size());
    const bool last_stage = stage == params_.N - 1;
    const double pos = x / h_;
    const long X0 = std::min(static_cast<long>(std::floor(pos)), params_.X_max);
    const double w = X0 >= params_.X_max ? 0.0 : pos - static_cast<double>(X0);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const int kk = frozen ? params_.G : static_cast<int>(k);
        if (last_stage) {
            out[k] = terminal_at(h, x, grid[k]);
        } else if (w == 0.0) {
            out[k] = node_e(child(h, X0, kk)).value;
        } else {
            const double lo = node_e(child(h, X0, kk)).value;
            const double hi = node_e(child(h, X0 + 1, kk)).value;
            out[k] = lo + w * (hi - lo);
        }
    }
    return out;
}

double Solver::value_m(const History& history, double x) {
    const std::vector<double> values = stage_values(history, x);
    return *std::max_element(values.begin(), values.end());
}

std::shared_ptr<const Solver::Row> Solver::m_row(const History& history) { return row_m(snap(history)); }

std::size_t Solver::cache_size() const {
    std::lock_guard lock(mutex_);
    return e_cache_.size() + m_cache_.size();
}

WalkTable::WalkTable(int L, long X_max, double step) : L_(L), X_max_(X_max), step_(step) {
    if (L < 1 || X_max < 0 || !(step > 0.0)) throw std::invalid_argument("WalkTable: need L >= 1, X_max >= 0, step > 0");
    data_.assign(static_cast<std::size_t>(L + 1) * static_cast<std::size_t>(X_max + 1),
                 std::numeric_limits<double>::quiet_NaN());
}

double WalkTable::operator()(long X, int j) const {
    if (!valid(X, j)) {
        throw GridOverflow(fmt::format("walk table lookup ({}, {}) outside the reachable cone (X_max = {}, L = {})", X,
                                       j, X_max_, L_));
    }
    return data_[index(X, j)];
}

WalkTable build_walk_table(std::span<const double> terminal_row, int L, double step) {
    if (terminal_row.empty()) throw std::invalid_argument("build_walk_table: empty terminal row");
    const auto X_max = static_cast<long>(terminal_row.size()) - 1;
    WalkTable table(L, X_max, step);
    for (long X = 0; X <= X_max; ++X) table.at(X, L) = terminal_row[static_cast<std::size_t>(X)];
    for (int j = L - 1; j >= 0; --j) {
        const long top = X_max - (L - j);
        if (top >= 0) table.at(0, j) = table.at(0, j + 1);
        for (long X = 1; X <= top; ++X) table.at(X, j) = 0.5 * (table.at(X - 1, j + 1) + table.at(X + 1, j + 1));
    }
    return table;
}

WalkTable build_walk_table(Solver& solver, const History& history) {
    const SnappedHistory h = solver.snap(history);
    if (h.stage() > 0 && h.last_v() >= 1.0) throw std::invalid_argument("build_walk_table: needs v_i < 1");
    const ExperimentParams& p = solver.params();
    const long need = static_cast<long>(std::ceil(solver.terminal().clamp() / solver.step())) + p.L;
    if (p.X_max < need) {
        throw GridOverflow(fmt::format("X_max = {} cannot hold the {}-step cone above the clamp (needs {})", p.X_max,
                                       p.L, need));
    }
    WalkTable table = build_walk_table(solver.m_row(history)->value, p.L, solver.step());
    table.stage = static_cast<int>(h.stage());
    table.history_key = h.key;
    return table;
}

void save_walk_table_csv(const WalkTable& table, const std::string& filename) {
    auto out = fmt::output_file(filename);
    out.print("X,j,value\n");
    for (int j = 0; j <= table.L(); ++j) {
        for (long X = 0; X <= table.X_max(); ++X) {
            if (table.valid(X, j)) out.print("{},{},{:.17g}\n", X, j, table(X, j));
        }
    }
}

double walk_bound(const TerminalFunction& U, const ExperimentParams& params) {
    return U.modulus(params.eps) + 3.0 * U.bound() * params.eps / std::sqrt(params.stage_qv());
}

AlwaysReport check_always(Solver& solver, const History& history) {
    const SnappedHistory h = solver.snap(history);
    const long X = h.stage() == 0 ? std::lround(1.0 / solver.step()) : h.last_X();
    const WalkTable table = build_walk_table(solver, history);
    AlwaysReport report;
    report.dp_value = solver.value_e(history);
    report.walk_value = table(X, 0);
    report.gap = std::abs(report.dp_value - report.walk_value);
    report.bound = walk_bound(solver.terminal(), solver.params());
    report.exceeded = report.gap > report.bound;
    return report;
}

}  // namespace gtd
