#include "gtd/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "gtd/stochastics.hpp"

namespace gtd {

TerminalFunction::TerminalFunction(std::string name, int arity, double C, double B, double lip_x, double lip_v,
                                   Raw raw)
    : name_(std::move(name)), arity_(arity), C_(C), B_(B), lip_x_(lip_x), lip_v_(lip_v), raw_(std::move(raw)) {
    if (arity_ < 1) throw std::invalid_argument("TerminalFunction: arity must be positive");
    if (!(C_ >= 0.0) || !(B_ > 0.0)) throw std::invalid_argument("TerminalFunction: need C >= 0 and B > 0");
    if (!(lip_x_ >= 0.0) || !(lip_v_ >= 0.0)) throw std::invalid_argument("TerminalFunction: negative Lipschitz constant");
}

double TerminalFunction::operator()(std::span<const double> x, std::span<const double> v) const {
    if (static_cast<int>(x.size()) != arity_ || static_cast<int>(v.size()) != arity_) {
        throw std::invalid_argument("TerminalFunction " + name_ + ": expected " + std::to_string(arity_) +
                                    " checkpoints");
    }
    double clamped[16];
    std::vector<double> heap;
    double* xs = clamped;
    if (x.size() > 16) {
        heap.resize(x.size());
        xs = heap.data();
    }
    for (std::size_t i = 0; i < x.size(); ++i) xs[i] = std::min(x[i], B_);
    return raw_(std::span<const double>(xs, x.size()), v);
}

Modulus TerminalFunction::modulus_fn() const {
    const double k = lip_x_ + lip_v_;
    return [k](double d) { return k * d; };
}

namespace {

double parse_constant(const std::string& name) {
    const auto open = name.find('(');
    const auto close = name.rfind(')');
    if (open == std::string::npos || close != name.size() - 1 || close <= open + 1) throw UnknownTerminal(name);
    try {
        std::size_t used = 0;
        const std::string arg = name.substr(open + 1, close - open - 1);
        const double c = std::stod(arg, &used);
        if (used != arg.size() || !(c >= 0.0) || !std::isfinite(c)) throw UnknownTerminal(name);
        return c;
    } catch (const std::logic_error&) {
        throw UnknownTerminal(name);
    }
}

}  // namespace

TerminalFunction builtin_terminal(const std::string& name, double B, int arity) {
    if (name == "capped_terminal") {
        return {name, arity, B, B, 1.0, 0.0, [](std::span<const double> x, std::span<const double>) { return x.back(); }};
    }
    if (name == "capped_max") {
        return {name, arity, B, B, 1.0, 0.0, [](std::span<const double> x, std::span<const double>) {
                    return *std::max_element(x.begin(), x.end());
                }};
    }
    if (name == "capped_range") {
        // max − min moves by up to twice the largest coordinate shift
        return {name, arity, B, B, 2.0, 0.0, [](std::span<const double> x, std::span<const double>) {
                    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
                    return *hi - *lo;
                }};
    }
    if (name.rfind("constant", 0) == 0) {
        const double c = parse_constant(name);
        return {name, arity, c, B, 0.0, 0.0, [c](std::span<const double>, std::span<const double>) { return c; }};
    }
    throw UnknownTerminal(name);
}

TerminalFunction tabulated_terminal(std::vector<double> values, double step, int arity) {
    if (values.size() < 2 || !(step > 0.0)) throw std::invalid_argument("tabulated_terminal: need >= 2 nodes, step > 0");
    double C = 0.0;
    double lip = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (!(values[k] >= 0.0) || !std::isfinite(values[k])) {
            throw std::invalid_argument("tabulated_terminal: values must be finite and >= 0");
        }
        C = std::max(C, values[k]);
        if (k > 0) lip = std::max(lip, std::abs(values[k] - values[k - 1]) / step);
    }
    const double top = step * static_cast<double>(values.size() - 1);
    auto table = std::make_shared<const std::vector<double>>(std::move(values));
    return {"tabulated", arity, C, top, lip, 0.0, [table, step](std::span<const double> x, std::span<const double>) {
                const auto& t = *table;
                const double pos = x.back() / step;
                const auto k = std::min(static_cast<std::size_t>(pos), t.size() - 2);
                const double w = std::min(pos - static_cast<double>(k), 1.0);
                return t[k] + w * (t[k + 1] - t[k]);
            }};
}

ModulusAudit audit_modulus(const TerminalFunction& U, int probes, double radius, std::uint64_t seed) {
    ModulusAudit audit;
    RngStream rng(seed, 0);
    const auto n = static_cast<std::size_t>(U.arity());
    std::vector<double> x(n), v(n), xq(n), vq(n);
    for (int p = 0; p < probes; ++p) {
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng.uniform() * (U.clamp() + 1.0);
            v[i] = rng.uniform();
            xq[i] = std::max(0.0, x[i] + radius * (2.0 * rng.uniform() - 1.0));
            vq[i] = std::clamp(v[i] + radius * (2.0 * rng.uniform() - 1.0), 0.0, 1.0);
        }
        std::sort(v.begin(), v.end());
        std::sort(vq.begin(), vq.end());
        double dx = 0.0, dv = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            dx = std::max(dx, std::abs(x[i] - xq[i]));
            dv = std::max(dv, std::abs(v[i] - vq[i]));
        }
        const double diff = std::abs(U(x, v) - U(xq, vq));
        const double excess = diff - (U.lip_x() * dx + U.lip_v() * dv);
        ++audit.probes;
        if (excess > 1e-12) ++audit.violations;
        audit.worst_excess = p == 0 ? excess : std::max(audit.worst_excess, excess);
    }
    return audit;
}

double ExperimentParams::step() const { return std::sqrt(S / (static_cast<double>(N) * L)); }

double ExperimentParams::stage_qv() const { return S / N; }

void ExperimentParams::finalize(const TerminalFunction& U) {
    if (!(S > 0.0) || N < 1 || L < 1) throw std::invalid_argument("ExperimentParams: need S > 0, N >= 1, L >= 1");
    if (!(eps > 0.0 && eps < 0.5)) throw std::invalid_argument("ExperimentParams: eps must lie in (0, 1/2)");
    const double k = U.lip_x() + U.lip_v();
    delta_price = k > 0.0 ? eps / k : std::numeric_limits<double>::infinity();
    if (Delta == 0.0) Delta = std::min(calibrate_delta(delta_price, eps), stage_qv() / 2.0);
    if (X_max == 0) {
        X_max = static_cast<long>(std::ceil((U.clamp() + 6.0 * std::sqrt(S)) / step())) + L;
    }
    validate(U);
}

void ExperimentParams::validate(const TerminalFunction& U) const {
    if (!(S > 0.0) || N < 1 || L < 1) throw std::invalid_argument("ExperimentParams: need S > 0, N >= 1, L >= 1");
    if (!(eps > 0.0 && eps < 0.5)) throw std::invalid_argument("ExperimentParams: eps must lie in (0, 1/2)");
    if (G < 2) throw std::invalid_argument("ExperimentParams: G must be at least 2");
    if (!(Delta > 0.0 && Delta < stage_qv())) throw std::invalid_argument("ExperimentParams: need 0 < Delta < S/N");
    if (U.arity() != N) throw std::invalid_argument("ExperimentParams: terminal arity differs from N");
    const long need = static_cast<long>(std::ceil(U.clamp() / step())) + L;
    if (X_max < need) {
        throw std::invalid_argument("ExperimentParams: X_max = " + std::to_string(X_max) + " is below " +
                                    std::to_string(need));
    }
}

Checkpoints checkpoints(const Path& path, double S, int N) {
    Checkpoints cp;
    cp.x.resize(static_cast<std::size_t>(N));
    cp.v.resize(static_cast<std::size_t>(N));
    const QVProfile qv = quadratic_variation(path);
    for (int i = 1; i <= N; ++i) {
        const double v = std::min(time_change(qv, S * i / N), 1.0);
        cp.v[static_cast<std::size_t>(i - 1)] = v;
        cp.x[static_cast<std::size_t>(i - 1)] = path(v);
    }
    return cp;
}

double eval_FN(const TerminalFunction& U, const ExperimentParams& params, const Path& path) {
    const Checkpoints cp = checkpoints(path, params.S, params.N);
    return U(cp.x, cp.v);
}

PathFunctional truncate(PathFunctional F, double n) {
    if (!(n >= 0.0)) throw std::invalid_argument("truncate: n must be >= 0");
    return [F = std::move(F), n](const Path& path) { return std::min(F(path), n); };
}

}  // namespace gtd
