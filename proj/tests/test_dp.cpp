#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gtd/dp.hpp"
#include "gtd/stochastics.hpp"
#include "oracles.hpp"

using namespace gtd;

namespace {

ExperimentParams params_for(const TerminalFunction& U, int N, int L = 64) {
    ExperimentParams p;
    p.N = N;
    p.L = L;
    p.finalize(U);
    return p;
}

}  // namespace

TEST_CASE("walk table small cases") {
    const double h = 0.5;
    std::vector<double> indicator(8, 0.0);
    indicator[3] = 1.0;
    const WalkTable t = build_walk_table(indicator, 2, h);
    CHECK(t(1, 0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(t(0, 0) == 0.0);

    std::vector<double> identity(40);
    for (std::size_t X = 0; X < identity.size(); ++X) identity[X] = static_cast<double>(X) * h;
    const WalkTable id = build_walk_table(identity, 6, h);
    for (long X = 0; X <= id.X_max() - 6; ++X) CHECK(id(X, 0) == doctest::Approx(X * h).epsilon(1e-14));

    CHECK_FALSE(id.valid(id.X_max(), 0));
    CHECK_THROWS_AS(id(id.X_max(), 0), GridOverflow);
    CHECK(id.valid(id.X_max(), 6));
}

TEST_CASE("walk table recursion") {
    RngStream rng(21, 0);
    std::vector<double> row(50);
    for (double& r : row) r = rng.uniform();
    const int L = 9;
    const WalkTable t = build_walk_table(row, L, 0.1);
    for (int j = 0; j < L; ++j) {
        CHECK(t(0, j) == t(0, j + 1));
        for (long X = 1; t.valid(X + 1, j + 1); ++X) {
            CHECK(t(X, j) == doctest::Approx(0.5 * (t(X - 1, j + 1) + t(X + 1, j + 1))).epsilon(1e-15));
        }
    }
    for (long X = 0; X <= t.X_max() - L; ++X) CHECK(t(X, 0) == doctest::Approx(oracle::walk_enumeration(row, X, L)).epsilon(1e-13));
}

TEST_CASE("history snapping") {
    const TerminalFunction U = builtin_terminal("capped_max", 2.0, 2);
    Solver solver(U, params_for(U, 2));
    const double h = solver.step();

    History hist;
    hist.x = {1.03};
    hist.v = {0.33};
    const SnappedHistory s = solver.snap(hist);
    REQUIRE(s.key.size() == 2);
    CHECK(s.point.x[0] == doctest::Approx(std::round(1.03 / h) * h));
    CHECK(s.point.v[0] <= 0.33);
    CHECK(s.point.v[0] > 0.33 - 1.0 / 16.0);
    CHECK(s.last_X() == std::lround(1.03 / h));

    const auto grid = solver.v_grid(0.25);
    REQUIRE(grid.size() == 17);
    CHECK(grid.front() == 0.25);
    CHECK(grid.back() == 1.0);
    CHECK(solver.v_grid(1.0).size() == 1);

    History frozen;
    frozen.x = {1.0, 1.7};
    frozen.v = {1.0, 1.0};
    const SnappedHistory f = solver.snap(frozen);
    CHECK(f.point.x[1] == f.point.x[0]);
}

TEST_CASE("single stage value matches the absorbed expectation") {
    const TerminalFunction U = builtin_terminal("capped_terminal", 2.0, 1);
    Solver solver(U, params_for(U, 1));
    const double ref = oracle::absorbed_mean([](double y) { return std::min(y, 2.0); }, 1.0, 1.0, {2.0});
    const double Ue0 = solver.value_e0();
    CHECK(std::abs(Ue0 - ref) <= solver.tolerance() + 1e-9);
    CHECK(solver.tolerance() < 0.01);
}

TEST_CASE("two-stage capped maximum against nested quadrature") {
    const TerminalFunction U = builtin_terminal("capped_max", 2.0, 2);
    Solver solver(U, params_for(U, 2));
    // The payoff ignores v and max(x, ξ) ≥ x, so every interior stage-1 time is optimal.
    const auto g = [](double x) {
        return oracle::absorbed_mean([x](double y) { return std::min(std::max(x, y), 2.0); }, x, 0.5,
                                     {x, 2.0});
    };
    const double ref = oracle::absorbed_mean(g, 1.0, 0.5, {2.0});
    CHECK(std::abs(solver.value_e0() - ref) <= solver.tolerance() + 1e-9);

    History h;
    h.x = {0.75};
    h.v = {0.5};
    CHECK(std::abs(solver.value_e(h) - g(solver.snap(h).point.x[0])) <= solver.bound_e(h) + 1e-9);
}

TEST_CASE("value functions stay in range and freeze at v = 1") {
    const TerminalFunction U = builtin_terminal("capped_range", 2.0, 2);
    Solver solver(U, params_for(U, 2, 16));
    const double v0 = solver.value_e0();
    CHECK(v0 >= 0.0);
    CHECK(v0 <= 2.0);
    History h;
    h.x = {1.25};
    h.v = {1.0};
    CHECK(solver.value_e(h) == doctest::Approx(0.0));
    CHECK(solver.value_m(h, 1.25) == doctest::Approx(0.0));
    const auto vals = solver.stage_values(History{}, 1.0);
    CHECK(vals.size() == 17);
    for (double v : vals) CHECK(v <= solver.value_m(History{}, 1.0) + 1e-15);
}

TEST_CASE("thread count does not change values") {
    const TerminalFunction U = builtin_terminal("capped_max", 2.0, 2);
    const ExperimentParams p = params_for(U, 2, 16);
    Solver one(U, p), many(U, p);
    many.set_threads(4);
    CHECK(one.value_e0() == many.value_e0());
    CHECK(one.tolerance() == many.tolerance());
}

TEST_CASE("walk tables from the solver and the coupling bound") {
    const TerminalFunction U = builtin_terminal("capped_max", 2.0, 2);
    Solver solver(U, params_for(U, 2));
    const WalkTable t = build_walk_table(solver, History{});
    const auto row = solver.m_row(History{});
    for (long X = 0; X <= t.X_max(); X += 7) CHECK(t(X, t.L()) == row->value[static_cast<std::size_t>(X)]);
    const AlwaysReport a = check_always(solver, History{});
    CHECK_FALSE(a.exceeded);
    CHECK(a.bound == doctest::Approx(walk_bound(U, solver.params())));

    ExperimentParams tight = solver.params();
    tight.X_max = static_cast<long>(std::ceil(2.0 / tight.step())) + tight.L;
    Solver small(U, tight);
    CHECK_NOTHROW(build_walk_table(small, History{}));

    History done;
    done.x = {1.0};
    done.v = {1.0};
    CHECK_THROWS(build_walk_table(solver, done));
}
