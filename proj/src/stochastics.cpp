#include "gtd/stochastics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/legendre.hpp>

namespace gtd {

std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finaliser
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) { return mix64(seed ^ mix64(value)); }

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed), stream_id_(stream_id) {
    const std::uint64_t a = mix64(master_seed);
    const std::uint64_t b = mix64(a ^ stream_id);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    engine_.seed(seq);
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

namespace {
double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }
}  // namespace

double normal_mass(double a, double b) {
    if (b <= a) return 0.0;
    if (a >= 0.0) return normal_sf(a) - normal_sf(b);
    return normal_cdf(b) - normal_cdf(a);
}

double AbsorbedTerminal::density(double y) const {
    if (y <= 0.0 || x <= 0.0) return 0.0;
    const double s = std::sqrt(a);
    return (normal_pdf((y - x) / s) - normal_pdf((y + x) / s)) / s;
}

double AbsorbedTerminal::mass(double lo, double hi) const {
    if (x <= 0.0 || hi <= lo) return 0.0;
    const double s = std::sqrt(a);
    return normal_mass((lo - x) / s, (hi - x) / s) - normal_mass((lo + x) / s, (hi + x) / s);
}

double AbsorbedTerminal::cdf(double y) const {
    if (y < 0.0) return 0.0;
    return atom0 + mass(0.0, y);
}

double AbsorbedTerminal::sample(RngStream& rng) const {
    const double s = std::sqrt(a);
    const double y = x + s * rng.normal();
    if (y <= 0.0) return 0.0;
    if (rng.uniform() < std::exp(-2.0 * x * y / a)) return 0.0;
    return y;
}

AbsorbedTerminal absorbed_terminal(double x, double a) {
    if (!(x >= 0.0) || !(a > 0.0)) throw std::invalid_argument("absorbed_terminal: need x >= 0 and a > 0");
    AbsorbedTerminal law;
    law.x = x;
    law.a = a;
    law.atom0 = 2.0 * normal_cdf(-x / std::sqrt(a));
    return law;
}

const GaussLegendre& gauss_legendre(int n) {
    static std::mutex mutex;
    static std::map<int, GaussLegendre> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    GaussLegendre rule;
    const auto positive = boost::math::legendre_p_zeros<double>(n);
    for (double z : positive) {
        const double dp = boost::math::legendre_p_prime<double>(n, z);
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule.nodes.push_back(z);
        rule.weights.push_back(w);
        if (z != 0.0) {
            rule.nodes.push_back(-z);
            rule.weights.push_back(w);
        }
    }
    return cache.emplace(n, std::move(rule)).first->second;
}

double absorbed_expectation(const std::function<double(double)>& u, double x, double a, int quad_nodes) {
    if (quad_nodes < 1) throw std::invalid_argument("absorbed_expectation: quad_nodes must be positive");
    const AbsorbedTerminal law = absorbed_terminal(x, a);
    double total = law.atom0 * u(0.0);
    if (x <= 0.0) return total;
    const double hi = x + 8.0 * std::sqrt(a);
    const double half = 0.5 * hi;
    const GaussLegendre& rule = gauss_legendre(quad_nodes);
    double acc = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        const double y = half * (rule.nodes[k] + 1.0);
        acc += rule.weights[k] * law.density(y) * u(y);
    }
    return total + half * acc;
}

PiecewiseExpectation absorbed_expectation_interpolated(std::span<const double> nodes, double step, double x,
                                                       double a) {
    if (nodes.empty()) throw std::invalid_argument("absorbed_expectation_interpolated: no nodes");
    const AbsorbedTerminal law = absorbed_terminal(x, a);
    PiecewiseExpectation out;
    out.value = law.atom0 * nodes[0];
    if (x <= 0.0) return out;

    const double s = std::sqrt(a);
    const std::size_t last = nodes.size() - 1;
    const double top = static_cast<double>(last) * step;

    // ∫_c^d (α + βy) φ((y-m)/s)/s dy for both the direct (m = x) and mirrored (m = -x) kernel.
    auto moment = [&](double c, double d, double m, double& m0, double& m1) {
        const double zc = (c - m) / s;
        const double zd = (d - m) / s;
        m0 = normal_mass(zc, zd);
        m1 = m * m0 - s * (normal_pdf(zd) - normal_pdf(zc));
    };
    auto second_diff = [&](std::size_t k) {
        if (last < 2) return 0.0;
        k = std::clamp<std::size_t>(k, 1, last - 1);
        return std::abs(nodes[k - 1] - 2.0 * nodes[k] + nodes[k + 1]);
    };

    const double reach = 12.0 * s;
    for (std::size_t k = 0; k < last; ++k) {
        const double c = static_cast<double>(k) * step;
        const double d = c + step;
        if (d < x - reach || c > x + reach) continue;
        const double beta = (nodes[k + 1] - nodes[k]) / step;
        const double alpha = nodes[k] - beta * c;
        double p0 = 0.0, p1 = 0.0, q0 = 0.0, q1 = 0.0;
        moment(c, d, x, p0, p1);
        moment(c, d, -x, q0, q1);
        out.value += alpha * (p0 - q0) + beta * (p1 - q1);
        const double cell_mass = std::max(0.0, p0 - q0);
        out.interpolation_bound += cell_mass * 0.25 * (second_diff(k) + second_diff(k + 1));
    }
    out.tail_mass = law.mass(top, std::numeric_limits<double>::infinity());
    out.value += nodes[last] * out.tail_mass;
    return out;
}

ModulusReport modulus_bound_check(const std::function<double(double)>& u, const std::function<double(double)>& f,
                                  double C, double x, double x_prime, double a, int quad_nodes, double quad_tol) {
    if (!(x >= 0.0 && x_prime >= x)) throw std::invalid_argument("modulus_bound_check: need 0 <= x <= x'");
    const double delta = x_prime - x;
    ModulusReport report;
    if (delta == 0.0) {
        report.bound = f(0.0);
        return report;
    }
    report.difference =
        std::abs(absorbed_expectation(u, x, a, quad_nodes) - absorbed_expectation(u, x_prime, a, quad_nodes));
    report.bound = f(delta) + C * delta / std::sqrt(a);
    report.violated = report.difference > report.bound + quad_tol;
    return report;
}

double calibrate_delta(double delta, double eps) {
    if (!(delta > 0.0) || !(eps > 0.0 && eps < 1.0)) {
        throw std::invalid_argument("calibrate_delta: need delta > 0 and 0 < eps < 1");
    }
    if (std::isinf(delta)) return std::numeric_limits<double>::infinity();
    auto bound = [&](double D) { return 4.0 * normal_cdf(-delta / std::sqrt(D)); };
    const double z = std::numbers::sqrt2 * boost::math::erfc_inv(eps / 2.0);
    const double root = (delta / z) * (delta / z);
    auto k = static_cast<long>(std::floor(100.0 * std::log10(root)));
    // Land on the largest grid point that satisfies the bound, from either side.
    while (bound(std::pow(10.0, static_cast<double>(k + 1) / 100.0)) <= eps) ++k;
    while (bound(std::pow(10.0, static_cast<double>(k) / 100.0)) > eps) --k;
    return std::pow(10.0, static_cast<double>(k) / 100.0);
}

PathPiece sample_scaled_bm(RngStream& rng, double x0, double total_qv, int n_steps, double t_start, double t_end,
                           const BmOptions& options) {
    if (!(total_qv > 0.0) || n_steps < 1 || !(t_start < t_end) || !(x0 >= 0.0)) {
        throw std::invalid_argument("sample_scaled_bm: need total_qv > 0, n_steps >= 1, t_start < t_end, x0 >= 0");
    }
    PathPiece piece;
    piece.times.reserve(static_cast<std::size_t>(n_steps) + 2);
    piece.values.reserve(static_cast<std::size_t>(n_steps) + 2);
    piece.times.push_back(t_start);
    piece.values.push_back(x0);
    if (x0 == 0.0) {
        piece.times.push_back(t_end);
        piece.values.push_back(0.0);
        piece.absorbed = true;
        return piece;
    }

    const double var = total_qv / n_steps;
    std::vector<double> incr(static_cast<std::size_t>(n_steps));
    double sumsq = 0.0;
    double carry = 0.0;
    for (double& d : incr) {
        d = std::sqrt(var) * rng.normal();
        const double term = d * d;
        const double sum = sumsq + term;
        carry += sumsq >= term ? (sumsq - sum) + term : (term - sum) + sumsq;
        sumsq = sum;
    }
    sumsq += carry;
    if (options.exact_qv && sumsq > 0.0) {
        const double scale = std::sqrt(total_qv / sumsq);
        for (double& d : incr) d *= scale;
    }

    const double dt = (t_end - t_start) / n_steps;
    double x = x0;
    double t_prev = t_start;
    for (int k = 0; k < n_steps; ++k) {
        const double t = (k + 1 == n_steps) ? t_end : t_start + (k + 1) * dt;
        const double b = x + incr[static_cast<std::size_t>(k)];
        bool hit = false;
        double t_hit = t;
        if (b <= 0.0) {
            hit = true;
            t_hit = t_prev + (t - t_prev) * (x / (x - b));
            if (!(t_hit > t_prev)) t_hit = t;
        } else if (options.bridge_absorption && rng.uniform() < std::exp(-2.0 * x * b / var)) {
            hit = true;
        }
        if (hit) {
            piece.times.push_back(t_hit);
            piece.values.push_back(0.0);
            if (t_hit < t_end) {
                piece.times.push_back(t_end);
                piece.values.push_back(0.0);
            }
            piece.absorbed = true;
            return piece;
        }
        piece.times.push_back(t);
        piece.values.push_back(b);
        x = b;
        t_prev = t;
    }
    return piece;
}

std::vector<long> sample_absorbed_walk(RngStream& rng, long X0, int L) {
    if (X0 < 0 || L < 1) throw std::invalid_argument("sample_absorbed_walk: need X0 >= 0 and L >= 1");
    std::vector<long> walk(static_cast<std::size_t>(L) + 1);
    walk[0] = X0;
    for (int j = 1; j <= L; ++j) {
        const long prev = walk[static_cast<std::size_t>(j - 1)];
        walk[static_cast<std::size_t>(j)] = prev == 0 ? 0 : prev + (rng.coin() ? 1 : -1);
    }
    return walk;
}

}  // namespace gtd
