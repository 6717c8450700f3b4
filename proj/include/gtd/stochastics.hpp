#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace gtd {

/// One reproducible random stream per (master seed, stream id). Identical pairs give
/// identical draws regardless of which thread consumes them.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    bool coin() { return (engine_() >> 63) != 0; }

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

private:
    std::uint64_t master_seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Stable 64-bit mixing, used to derive stream ids from structured keys.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value);

double normal_pdf(double z);
double normal_cdf(double z);
/// Φ(b) − Φ(a) for a ≤ b without cancellation in either tail.
double normal_mass(double a, double b);

/// Law at elapsed quadratic variation `a` of a Brownian motion started at x and
/// stopped at its first visit to 0.
struct AbsorbedTerminal {
    double x = 0.0;
    double a = 1.0;
    double atom0 = 1.0;

    double density(double y) const;
    /// P(ξ ≤ y), including the atom at 0.
    double cdf(double y) const;
    /// P(lo < ξ ≤ hi) for 0 ≤ lo ≤ hi (hi may be +∞).
    double mass(double lo, double hi) const;
    /// Exact draw: unabsorbed Gaussian endpoint plus the bridge probability of having touched 0.
    double sample(RngStream& rng) const;
};

AbsorbedTerminal absorbed_terminal(double x, double a);

inline constexpr int kDefaultQuadNodes = 256;

/// E u(ξ) for ξ ~ absorbed_terminal(x, a): atom0·u(0) plus Gauss–Legendre
/// quadrature of u against the density on [0, x + 8√a].
double absorbed_expectation(const std::function<double(double)>& u, double x, double a,
                            int quad_nodes = kDefaultQuadNodes);

struct PiecewiseExpectation {
    double value = 0.0;
    /// A-posteriori estimate of the error from replacing the underlying function by
    /// its linear interpolant on the grid (exact bound when the slope is monotone
    /// across each pair of neighbouring cells).
    double interpolation_bound = 0.0;
    /// Probability that ξ lands beyond the last node, where the interpolant is flat.
    double tail_mass = 0.0;
};

/// Exact expectation, under absorbed_terminal(x, a), of the linear interpolant of
/// `nodes` on the grid {k·step}; flat beyond the last node.
PiecewiseExpectation absorbed_expectation_interpolated(std::span<const double> nodes, double step, double x,
                                                       double a);

struct ModulusReport {
    double difference = 0.0;
    double bound = 0.0;
    bool violated = false;
};

/// Compares |E u(ξ^x) − E u(ξ^{x'})| with f(δ) + Cδ/√a, δ = x' − x.
ModulusReport modulus_bound_check(const std::function<double(double)>& u, const std::function<double(double)>& f,
                                  double C, double x, double x_prime, double a, int quad_nodes = kDefaultQuadNodes,
                                  double quad_tol = 1e-9);

/// Largest Δ on a 100-per-decade log grid with 4Φ(−δ/√Δ) ≤ ε. +∞ when δ is infinite.
double calibrate_delta(double delta, double eps);

struct BmOptions {
    /// Rescale the increments so their squared sum equals total_qv exactly.
    bool exact_qv = false;
    /// Also absorb when the Brownian bridge between two positive knots touches 0,
    /// which makes the knot values an exact martingale.
    bool bridge_absorption = true;
};

struct PathPiece {
    std::vector<double> times;
    std::vector<double> values;
    bool absorbed = false;
};

/// Discrete Brownian motion from x0 with per-step variance total_qv/n_steps on a
/// uniform grid over [t_start, t_end], stopped at 0.
PathPiece sample_scaled_bm(RngStream& rng, double x0, double total_qv, int n_steps, double t_start, double t_end,
                           const BmOptions& options = {});

/// Symmetric ±1 walk of L steps from X0, absorbed at 0.
std::vector<long> sample_absorbed_walk(RngStream& rng, long X0, int L);

/// Gauss–Legendre nodes and weights on [-1, 1], cached per order.
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const GaussLegendre& gauss_legendre(int n);

}  // namespace gtd
