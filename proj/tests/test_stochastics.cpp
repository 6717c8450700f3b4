#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "gtd/stochastics.hpp"
#include "oracles.hpp"

using namespace gtd;

TEST_CASE("normal helpers") {
    for (double z : {-8.0, -2.5, -0.3, 0.0, 0.7, 3.1}) {
        CHECK(normal_cdf(z) == doctest::Approx(oracle::Phi(z)).epsilon(1e-14));
        CHECK(normal_pdf(z) == doctest::Approx(oracle::phi(z)).epsilon(1e-14));
    }
    CHECK(normal_mass(-1.0, 1.0) == doctest::Approx(0.6826894921370859).epsilon(1e-14));
    CHECK(normal_mass(9.0, 10.0) > 0.0);
}

TEST_CASE("rng streams are reproducible and distinct") {
    RngStream a(7, 3), b(7, 3), c(7, 4);
    bool differs = false;
    for (int k = 0; k < 10; ++k) {
        const double x = a.normal();
        CHECK(x == b.normal());
        differs = differs || x != c.normal();
    }
    CHECK(differs);
}

TEST_CASE("absorbed law against the image formula") {
    for (double x : {0.3, 1.0, 2.2}) {
        for (double a : {0.05, 0.5, 1.0}) {
            const AbsorbedTerminal law = absorbed_terminal(x, a);
            CHECK(law.atom0 == doctest::Approx(oracle::atom(x, a)).epsilon(1e-13));
            for (double y : {0.01, 0.5, 1.3, 3.0}) {
                CHECK(law.density(y) == doctest::Approx(oracle::image_density(y, x, a)).epsilon(1e-12));
            }
            const double total = law.atom0 + oracle::kronrod_part([](double) { return 1.0; }, x, a);
            CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
            CHECK(law.cdf(0.0) == doctest::Approx(law.atom0).epsilon(1e-14));
            CHECK(law.mass(0.0, INFINITY) + law.atom0 == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    const AbsorbedTerminal dead = absorbed_terminal(0.0, 1.0);
    CHECK(dead.atom0 == 1.0);
}

TEST_CASE("absorbed expectation matches adaptive quadrature") {
    const auto u = [](double y) { return std::min(y, 2.0); };
    for (double x : {0.2, 1.0, 1.9}) {
        for (double a : {0.1, 0.5, 1.0}) {
            const double ref = oracle::absorbed_mean(u, x, a, {2.0});
            // A kink inside the quadrature range limits fixed-order Gauss–Legendre to about 1e-5.
            CHECK(std::abs(absorbed_expectation(u, x, a) - ref) < 1e-4);
            const auto smooth = [](double y) { return 1.0 - std::exp(-y); };
            CHECK(absorbed_expectation(smooth, x, a) == doctest::Approx(oracle::absorbed_mean(smooth, x, a)).epsilon(1e-9));
            CHECK(absorbed_expectation([](double y) { return y; }, x, a) == doctest::Approx(x).epsilon(1e-9));
        }
    }
}

TEST_CASE("closed-form expectation of an interpolant") {
    const double step = 0.05;
    std::vector<double> nodes(121);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const double y = step * static_cast<double>(k);
        nodes[k] = std::sin(3.0 * y) + 0.5 * std::min(y, 1.7);
    }
    const auto interp = [&](double y) {
        const double top = step * static_cast<double>(nodes.size() - 1);
        if (y >= top) return nodes.back();
        const auto k = static_cast<std::size_t>(y / step);
        const double w = y / step - static_cast<double>(k);
        return (1.0 - w) * nodes[k] + w * nodes[k + 1];
    };
    std::vector<double> kinks;
    for (std::size_t k = 1; k < nodes.size(); ++k) kinks.push_back(step * static_cast<double>(k));
    for (double x : {0.1, 1.0, 2.5}) {
        for (double a : {0.02, 0.5}) {
            const PiecewiseExpectation e = absorbed_expectation_interpolated(nodes, step, x, a);
            CHECK(e.value == doctest::Approx(oracle::absorbed_mean(interp, x, a, kinks)).epsilon(1e-10));
            CHECK(e.interpolation_bound >= 0.0);
        }
    }
    // Linear rows have no interpolation error, and the identity keeps its mean.
    std::vector<double> linear(400);
    for (std::size_t k = 0; k < linear.size(); ++k) linear[k] = step * static_cast<double>(k);
    const PiecewiseExpectation id = absorbed_expectation_interpolated(linear, step, 1.0, 1.0);
    CHECK(id.value == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(id.interpolation_bound < 1e-12);
}

TEST_CASE("absorbed sampling matches the law") {
    const double x = 0.8, a = 0.5;
    const AbsorbedTerminal law = absorbed_terminal(x, a);
    RngStream rng(11, 0);
    const int M = 200000;
    int zeros = 0;
    double sum = 0.0;
    int below_one = 0;
    for (int m = 0; m < M; ++m) {
        const double xi = law.sample(rng);
        CHECK(xi >= 0.0);
        zeros += xi == 0.0;
        below_one += xi <= 1.0;
        sum += xi;
    }
    const double p0 = law.atom0;
    CHECK(std::abs(zeros / double(M) - p0) < 4.0 * std::sqrt(p0 * (1 - p0) / M));
    const double p1 = law.cdf(1.0);
    CHECK(std::abs(below_one / double(M) - p1) < 4.0 * std::sqrt(p1 * (1 - p1) / M));
    CHECK(std::abs(sum / M - x) < 4.0 * std::sqrt(a) / std::sqrt(double(M)) * 1.5);
}

TEST_CASE("scaled Brownian pieces") {
    RngStream rng(12, 0);
    const PathPiece piece = sample_scaled_bm(rng, 1.0, 0.3, 64, 0.2, 0.6, BmOptions{true, true});
    REQUIRE(piece.times.size() == piece.values.size());
    CHECK(piece.times.front() == 0.2);
    CHECK(piece.values.front() == 1.0);
    if (!piece.absorbed) {
        CHECK(piece.times.back() == 0.6);
        double ss = 0.0;
        for (std::size_t k = 1; k < piece.values.size(); ++k) {
            const double d = piece.values[k] - piece.values[k - 1];
            ss += d * d;
        }
        CHECK(ss == doctest::Approx(0.3).epsilon(1e-12));
    } else {
        CHECK(piece.values.back() == 0.0);
    }

    // Terminal mean stays x0 and the absorption frequency matches the continuous law.
    const int M = 40000;
    double sum = 0.0;
    int dead = 0;
    for (int m = 0; m < M; ++m) {
        RngStream r(13, static_cast<std::uint64_t>(m));
        const PathPiece p = sample_scaled_bm(r, 0.5, 0.25, 16, 0.0, 1.0);
        sum += p.values.back();
        dead += p.absorbed;
    }
    CHECK(std::abs(sum / M - 0.5) < 4.0 * 0.5 / std::sqrt(double(M)));
    const double p0 = oracle::atom(0.5, 0.25);
    CHECK(std::abs(dead / double(M) - p0) < 4.0 * std::sqrt(p0 * (1 - p0) / M));
}

TEST_CASE("absorbed walk distribution") {
    std::map<long, int> counts;
    const int M = 100000;
    for (int m = 0; m < M; ++m) {
        RngStream rng(14, static_cast<std::uint64_t>(m));
        const auto walk = sample_absorbed_walk(rng, 1, 2);
        REQUIRE(walk.size() == 3);
        ++counts[walk.back()];
    }
    CHECK(counts.size() == 3);
    CHECK(std::abs(counts[0] / double(M) - 0.5) < 0.01);
    CHECK(std::abs(counts[1] / double(M) - 0.25) < 0.01);
    CHECK(std::abs(counts[3] / double(M) - 0.25) < 0.01);
}

TEST_CASE("calibrate_delta") {
    double prev = 0.0;
    for (double delta : {0.01, 0.05, 0.1, 0.5, 1.0}) {
        const double D = calibrate_delta(delta, 0.05);
        CHECK(D > prev);
        CHECK(4.0 * oracle::Phi(-delta / std::sqrt(D)) <= 0.05 * (1 + 1e-12));
        CHECK(4.0 * oracle::Phi(-delta / std::sqrt(D * std::pow(10.0, 0.01))) > 0.05);
        prev = D;
    }
    CHECK(calibrate_delta(0.1, 0.1) > calibrate_delta(0.1, 0.01));
    CHECK(std::isinf(calibrate_delta(INFINITY, 0.05)));

    // Monte-Carlo: a Brownian move over time Δ exceeds δ in sup norm with probability ≤ ε.
    const double delta = 0.1, eps = 0.05;
    const double D = calibrate_delta(delta, eps);
    const int M = 20000, n = 256;
    int big = 0;
    for (int m = 0; m < M; ++m) {
        RngStream rng(15, static_cast<std::uint64_t>(m));
        double w = 0.0, top = 0.0;
        for (int k = 0; k < n; ++k) {
            w += std::sqrt(D / n) * rng.normal();
            top = std::max(top, std::abs(w));
        }
        big += top > delta;
    }
    CHECK(big / double(M) <= eps + 4.0 * std::sqrt(eps * (1 - eps) / M));
}

TEST_CASE("modulus bound for Lipschitz payoffs") {
    const auto u = [](double y) { return std::min(y, 2.0); };
    const auto f = [](double d) { return d; };
    for (double a : {0.1, 0.5}) {
        for (double x : {0.1, 1.0, 1.8}) {
            const ModulusReport r = modulus_bound_check(u, f, 2.0, x, x + 0.05, a);
            CHECK_FALSE(r.violated);
            CHECK(r.difference <= r.bound);
        }
    }
}
