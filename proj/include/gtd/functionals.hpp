#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gtd/paths.hpp"

namespace gtd {

class UnknownTerminal : public std::invalid_argument {
public:
    explicit UnknownTerminal(const std::string& name) : std::invalid_argument("unknown terminal function: " + name) {}
};

/// Terminal payoff U(x_1..x_N; v_1..v_N) with values in [0, C].
///
/// The declared modulus is stated in the plain ℓ∞ metric on (x, v):
///   |U(p) − U(q)| ≤ lip_x·max_i |x_i − x'_i| + lip_v·max_i |v_i − v'_i|.
/// Prices are clamped at B before the raw payoff is applied.
class TerminalFunction {
public:
    using Raw = std::function<double(std::span<const double> x, std::span<const double> v)>;

    TerminalFunction() = default;
    TerminalFunction(std::string name, int arity, double C, double B, double lip_x, double lip_v, Raw raw);

    const std::string& name() const noexcept { return name_; }
    int arity() const noexcept { return arity_; }
    double bound() const noexcept { return C_; }
    double clamp() const noexcept { return B_; }
    double lip_x() const noexcept { return lip_x_; }
    double lip_v() const noexcept { return lip_v_; }

    double operator()(std::span<const double> x, std::span<const double> v) const;

    /// f(d) = (lip_x + lip_v)·d, a modulus valid for both coordinates at once.
    double modulus(double d) const { return (lip_x_ + lip_v_) * d; }
    Modulus modulus_fn() const;

private:
    std::string name_;
    int arity_ = 0;
    double C_ = 0.0;
    double B_ = 0.0;
    double lip_x_ = 0.0;
    double lip_v_ = 0.0;
    Raw raw_;
};

/// name ∈ {capped_terminal, capped_max, capped_range, constant(c)}.
TerminalFunction builtin_terminal(const std::string& name, double B, int arity);

/// U depending on x_N only, given on the grid {k·step}; linear between nodes and
/// flat beyond the last one.
TerminalFunction tabulated_terminal(std::vector<double> values, double step, int arity);

struct ModulusAudit {
    int probes = 0;
    int violations = 0;
    double worst_excess = 0.0;  // max of |U(p)−U(q)| − declared bound, over all probes
};

/// Random probing of the declared modulus on ordered (x, v) pairs within `radius`.
ModulusAudit audit_modulus(const TerminalFunction& U, int probes, double radius, std::uint64_t seed);

/// Configured parameters plus quantities derived from them and from U.
struct ExperimentParams {
    double S = 1.0;
    int N = 2;
    int L = 64;
    double eps = 0.05;
    int G = 16;
    /// 0 means derive: min(calibrate_delta(δ, ε), S/(2N)) with δ chosen so f(δ) = ε.
    double Delta = 0.0;
    /// 0 means derive: ⌈(B + 6√S)/h⌉ + L.
    long X_max = 0;

    double step() const;        // h = √(S/NL)
    double stage_qv() const;    // S/N
    double delta_price = 0.0;   // δ actually used (may be +∞)

    /// Fills Delta and X_max where left at 0, then checks every invariant.
    void finalize(const TerminalFunction& U);
    void validate(const TerminalFunction& U) const;
};

struct Checkpoints {
    std::vector<double> x;
    std::vector<double> v;
};

/// v_i = φ_{iS/N}(ω) ∧ 1 and x_i = ω(v_i) for i = 1..N.
Checkpoints checkpoints(const Path& path, double S, int N);

double eval_FN(const TerminalFunction& U, const ExperimentParams& params, const Path& path);

using PathFunctional = std::function<double(const Path&)>;

/// F ∧ n.
PathFunctional truncate(PathFunctional F, double n);

}  // namespace gtd
