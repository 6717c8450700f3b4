#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gtd {

/// Modulus of continuity: increasing, f(0+) = 0.
using Modulus = std::function<double(double)>;

inline constexpr double kInfiniteTime = std::numeric_limits<double>::infinity();

class PathError : public std::invalid_argument {
public:
    enum class Kind { LengthMismatch, BadStart, NegativeValue, NonMonotoneTimes, BadEndpoints, NotAbsorbed, Io };

    PathError(Kind kind, const std::string& what) : std::invalid_argument(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// What make_path does with a path that leaves zero after touching it.
enum class AbsorptionPolicy { Strict, Coerce };

/// Positive price path on [0,1], piecewise linear between knots, starting at 1
/// and absorbed at 0.
class Path {
public:
    Path() = default;

    std::span<const double> times() const noexcept { return times_; }
    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return times_.size(); }

    /// Linear interpolation; exact at knots.
    double operator()(double t) const;

    /// Index k of the knot interval [t_k, t_{k+1}] containing t (last interval for t = 1).
    std::size_t segment_of(double t) const;

private:
    friend Path make_path(std::vector<double>, std::vector<double>, AbsorptionPolicy);
    friend Path make_path_unchecked(std::vector<double>, std::vector<double>);
    std::vector<double> times_;
    std::vector<double> values_;
};

Path make_path(std::vector<double> times, std::vector<double> values,
               AbsorptionPolicy policy = AbsorptionPolicy::Coerce);

/// For generators that already guarantee the invariants. Debug builds still assert them.
Path make_path_unchecked(std::vector<double> times, std::vector<double> values);

double eval(const Path& path, double t);

double uniform_distance(const Path& a, const Path& b);

/// Hausdorff distance between graph(a) ∪ {1}×[0,∞) and graph(b) ∪ {1}×[0,∞) in the
/// ℓ∞ norm. The outer sup runs over each graph sampled with spacing ≤ resolution;
/// the inner inf is exact (per-segment minimisation plus the ray term 1 − t).
/// Never exceeds the true distance, and is within resolution/2 of it.
double hausdorff_distance(const Path& a, const Path& b, double resolution = 1e-3);

/// ℓ∞ distance from (t, x) to the graph of the path (no ray).
double graph_distance(const Path& path, double t, double x);

struct QVProfile {
    std::vector<double> times;
    std::vector<double> qv;

    double total() const noexcept { return qv.empty() ? 0.0 : qv.back(); }
};

/// Running sum of squared increments on the path's own knots.
QVProfile quadratic_variation(const Path& path);

/// First time the quadratic variation reaches `level`, interpolating linearly
/// inside a knot interval; kInfiniteTime if the total falls short.
double time_change(const QVProfile& qv, double level);
double time_change(const Path& path, double level);

struct GridHits {
    std::vector<double> times;
    std::vector<long> levels;  // ω(T_j) / step
};

/// Successive visits to distinct levels of the grid step·ℕ₀ on [start, stop].
/// The first hit is the first grid visit at or after `start`; afterwards each hit
/// is the first visit to a neighbouring level. Stops after a hit at level 0.
GridHits grid_hitting_times(const Path& path, double start, double stop, double step);

struct RegularityFlags {
    bool in_A1 = false;
    bool in_A2 = false;
};

/// in_A1: total quadratic variation exceeds S. in_A2: the path re-indexed by its
/// quadratic variation, sampled at levels kS/samples, breaks |x(s)-x(s')| ≤ f(|s-s'|) + slack.
RegularityFlags check_regularity(const Path& path, double S, const Modulus& f, double slack,
                                 int samples = 128);

Path load_path_csv(const std::string& filename, AbsorptionPolicy policy = AbsorptionPolicy::Strict);
void save_path_csv(const Path& path, const std::string& filename);

}  // namespace gtd
