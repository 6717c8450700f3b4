#include "gtd/paths.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace gtd {

namespace {

// Relative slack used when deciding that a price sits on a grid level.
constexpr double kGridTol = 1e-9;

double segment_linf_distance(double t0, double x0, double t1, double x1, double tp, double xp) {
    const double dt = t1 - t0;
    const double slope = dt > 0.0 ? (x1 - x0) / dt : 0.0;
    auto x_at = [&](double t) { return x0 + slope * (t - t0); };
    auto cost = [&](double t) {
        t = std::clamp(t, t0, t1);
        return std::max(std::abs(t - tp), std::abs(x_at(t) - xp));
    };

    double best = std::min(cost(t0), cost(t1));
    best = std::min(best, cost(tp));
    if (slope != 0.0) {
        best = std::min(best, cost(t0 + (xp - x0) / slope));
    }
    // |t - tp| = |x(t) - xp| crossings
    const double c = x0 - slope * t0 - xp;
    if (1.0 - slope != 0.0) best = std::min(best, cost((tp + c) / (1.0 - slope)));
    if (1.0 + slope != 0.0) best = std::min(best, cost((tp - c) / (1.0 + slope)));
    return best;
}

double graph_distance_bounded(const Path& path, double t, double x, double bound) {
    const auto ts = path.times();
    const auto xs = path.values();
    const std::size_t n = ts.size();
    const std::size_t k = path.segment_of(std::clamp(t, 0.0, 1.0));

    double best = bound;
    // Segments further than `best` in time cannot improve the ℓ∞ distance.
    for (std::size_t s = k + 1; s-- > 0;) {
        if (t - ts[s + 1] >= best) break;
        best = std::min(best, segment_linf_distance(ts[s], xs[s], ts[s + 1], xs[s + 1], t, x));
    }
    for (std::size_t s = k + 1; s + 1 < n; ++s) {
        if (ts[s] - t >= best) break;
        best = std::min(best, segment_linf_distance(ts[s], xs[s], ts[s + 1], xs[s + 1], t, x));
    }
    return best;
}

double directed_hausdorff(const Path& from, const Path& to, double resolution) {
    const auto ts = from.times();
    const auto xs = from.values();
    double worst = 0.0;
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
        const double dt = ts[k + 1] - ts[k];
        const double dx = xs[k + 1] - xs[k];
        const auto pieces =
            static_cast<std::size_t>(std::max(1.0, std::ceil(std::max(dt, std::abs(dx)) / resolution)));
        const std::size_t first = (k == 0) ? 0 : 1;
        for (std::size_t q = first; q <= pieces; ++q) {
            const double frac = static_cast<double>(q) / static_cast<double>(pieces);
            const double t = ts[k] + dt * frac;
            const double x = xs[k] + dx * frac;
            const double ray = 1.0 - t;
            if (ray <= worst) continue;
            worst = std::max(worst, graph_distance_bounded(to, t, x, ray));
        }
    }
    return worst;
}

bool near_level(double price, double step, long& level) {
    const double r = price / step;
    const double rounded = std::round(r);
    if (std::abs(r - rounded) <= kGridTol * std::max(1.0, std::abs(r))) {
        level = static_cast<long>(rounded);
        return true;
    }
    return false;
}

}  // namespace

double Path::operator()(double t) const {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::out_of_range(fmt::format("eval: time {} outside [0,1]", t));
    }
    const std::size_t k = segment_of(t);
    const double t0 = times_[k];
    const double t1 = times_[k + 1];
    if (t == t0) return values_[k];
    if (t == t1) return values_[k + 1];
    const double w = (t - t0) / (t1 - t0);
    return values_[k] + w * (values_[k + 1] - values_[k]);
}

std::size_t Path::segment_of(double t) const {
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t k = static_cast<std::size_t>(std::distance(times_.begin(), it));
    k = (k == 0) ? 0 : k - 1;
    return std::min(k, times_.size() - 2);
}

Path make_path(std::vector<double> times, std::vector<double> values, AbsorptionPolicy policy) {
    using K = PathError::Kind;
    if (times.size() != values.size() || times.size() < 2) {
        throw PathError(K::LengthMismatch, "path needs equal-length times and values with at least 2 knots");
    }
    if (times.front() != 0.0 || times.back() != 1.0) {
        throw PathError(K::BadEndpoints, "path times must start at 0 and end at 1");
    }
    for (std::size_t k = 1; k < times.size(); ++k) {
        if (!(times[k] > times[k - 1])) {
            throw PathError(K::NonMonotoneTimes, fmt::format("times not strictly increasing at knot {}", k));
        }
    }
    if (values.front() != 1.0) {
        throw PathError(K::BadStart, fmt::format("path must start at 1, got {}", values.front()));
    }
    bool absorbed = false;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (!(values[k] >= 0.0) || !std::isfinite(values[k])) {
            throw PathError(K::NegativeValue, fmt::format("negative or non-finite value {} at knot {}", values[k], k));
        }
        if (absorbed && values[k] != 0.0) {
            if (policy == AbsorptionPolicy::Strict) {
                throw PathError(K::NotAbsorbed, fmt::format("path leaves 0 at knot {}", k));
            }
            values[k] = 0.0;
        }
        absorbed = absorbed || values[k] == 0.0;
    }
    Path p;
    p.times_ = std::move(times);
    p.values_ = std::move(values);
    return p;
}

Path make_path_unchecked(std::vector<double> times, std::vector<double> values) {
    assert(times.size() == values.size() && times.size() >= 2);
    assert(times.front() == 0.0 && times.back() == 1.0);
    assert(values.front() == 1.0);
    Path p;
    p.times_ = std::move(times);
    p.values_ = std::move(values);
    return p;
}

double eval(const Path& path, double t) { return path(t); }

double uniform_distance(const Path& a, const Path& b) {
    double d = 0.0;
    for (double t : a.times()) d = std::max(d, std::abs(a(t) - b(t)));
    for (double t : b.times()) d = std::max(d, std::abs(a(t) - b(t)));
    return d;
}

double graph_distance(const Path& path, double t, double x) {
    return graph_distance_bounded(path, t, x, std::numeric_limits<double>::infinity());
}

double hausdorff_distance(const Path& a, const Path& b, double resolution) {
    if (!(resolution > 0.0)) throw std::invalid_argument("hausdorff_distance: resolution must be positive");
    return std::max(directed_hausdorff(a, b, resolution), directed_hausdorff(b, a, resolution));
}

QVProfile quadratic_variation(const Path& path) {
    QVProfile out;
    const auto ts = path.times();
    const auto xs = path.values();
    out.times.assign(ts.begin(), ts.end());
    out.qv.resize(xs.size());
    // Neumaier summation keeps the running total within a few ulps, which the
    // time change relies on when a level is met exactly at a knot.
    double acc = 0.0;
    double carry = 0.0;
    out.qv[0] = 0.0;
    for (std::size_t k = 1; k < xs.size(); ++k) {
        const double d = xs[k] - xs[k - 1];
        const double term = d * d;
        const double sum = acc + term;
        carry += std::abs(acc) >= term ? (acc - sum) + term : (term - sum) + acc;
        acc = sum;
        out.qv[k] = acc + carry;
    }
    return out;
}

double time_change(const QVProfile& profile, double level) {
    if (level <= 0.0) return profile.times.front();
    const auto& qv = profile.qv;
    // Treat a relative shortfall of 1e-13 as reached.
    const double slack = 1e-13 * std::max(1.0, level);
    const auto it = std::lower_bound(qv.begin(), qv.end(), level - slack);
    if (it == qv.end()) return kInfiniteTime;
    const auto k = static_cast<std::size_t>(std::distance(qv.begin(), it));
    if (k == 0 || *it <= level + slack) return profile.times[k];
    const double lo = qv[k - 1];
    const double w = std::clamp((level - lo) / (qv[k] - lo), 0.0, 1.0);
    return profile.times[k - 1] + w * (profile.times[k] - profile.times[k - 1]);
}

double time_change(const Path& path, double level) { return time_change(quadratic_variation(path), level); }

GridHits grid_hitting_times(const Path& path, double start, double stop, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("grid_hitting_times: step must be positive");
    if (!(0.0 <= start && start <= stop && stop <= 1.0)) {
        throw std::invalid_argument("grid_hitting_times: need 0 <= start <= stop <= 1");
    }
    GridHits hits;
    const auto ts = path.times();
    const auto xs = path.values();

    std::size_t seg = path.segment_of(start);
    double t = start;
    double x = path(start);
    long level = 0;
    bool on_grid = near_level(x, step, level);
    const double tol = kGridTol * step;

    // First visit to the grid.
    while (!on_grid) {
        const double tb = ts[seg + 1];
        const double b = xs[seg + 1];
        if (b != x) {
            const double target_level = b > x ? std::ceil(x / step) : std::floor(x / step);
            const double target = target_level * step;
            const bool reached = b > x ? b >= target - tol : b <= target + tol;
            if (reached) {
                const double w = std::clamp((target - x) / (b - x), 0.0, 1.0);
                t = t + w * (tb - t);
                x = target;
                level = static_cast<long>(target_level);
                on_grid = true;
                break;
            }
        }
        if (seg + 2 >= ts.size() || tb > stop) return hits;
        t = tb;
        x = b;
        ++seg;
        on_grid = near_level(x, step, level);
        if (on_grid) x = static_cast<double>(level) * step;
    }
    if (t > stop) return hits;
    hits.times.push_back(t);
    hits.levels.push_back(level);

    while (level > 0) {
        const double up = static_cast<double>(level + 1) * step;
        const double down = static_cast<double>(level - 1) * step;
        // Walk forward from (t, x) inside segment `seg` until a neighbouring level is reached.
        while (true) {
            const double tb = ts[seg + 1];
            const double b = xs[seg + 1];
            int dir = 0;
            if (b >= up - tol) dir = 1;
            else if (b <= down + tol) dir = -1;
            if (dir != 0) {
                const double target = dir > 0 ? up : down;
                const double w = std::clamp((target - x) / (b - x), 0.0, 1.0);
                t = t + w * (tb - t);
                x = target;
                level += dir;
                break;
            }
            if (seg + 2 >= ts.size() || tb > stop) return hits;
            t = tb;
            x = b;
            ++seg;
        }
        if (t > stop) return hits;
        hits.times.push_back(t);
        hits.levels.push_back(level);
        // Stay in the segment where the hit happened; the hit may sit on its right knot.
        if (t >= ts[seg + 1] && seg + 2 < ts.size()) {
            ++seg;
        }
    }
    return hits;
}

RegularityFlags check_regularity(const Path& path, double S, const Modulus& f, double slack, int samples) {
    RegularityFlags flags;
    const QVProfile qv = quadratic_variation(path);
    flags.in_A1 = qv.total() > S;

    std::vector<double> x(static_cast<std::size_t>(samples) + 1);
    for (int k = 0; k <= samples; ++k) {
        const double s = S * k / samples;
        const double tau = time_change(qv, s);
        x[static_cast<std::size_t>(k)] = path(std::min(tau, 1.0));
    }
    for (int a = 0; a <= samples && !flags.in_A2; ++a) {
        for (int b = a + 1; b <= samples; ++b) {
            const double lag = S * (b - a) / samples;
            if (std::abs(x[static_cast<std::size_t>(a)] - x[static_cast<std::size_t>(b)]) > f(lag) + slack) {
                flags.in_A2 = true;
                break;
            }
        }
    }
    return flags;
}

Path load_path_csv(const std::string& filename, AbsorptionPolicy policy) {
    std::ifstream in(filename);
    if (!in) throw PathError(PathError::Kind::Io, "cannot open path file " + filename);
    std::string line;
    if (!std::getline(in, line)) throw PathError(PathError::Kind::Io, "empty path file " + filename);
    std::vector<double> ts;
    std::vector<double> xs;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw PathError(PathError::Kind::Io, fmt::format("{}:{}: expected 't,value'", filename, lineno));
        }
        try {
            ts.push_back(std::stod(line.substr(0, comma)));
            xs.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw PathError(PathError::Kind::Io, fmt::format("{}:{}: malformed number", filename, lineno));
        }
    }
    return make_path(std::move(ts), std::move(xs), policy);
}

void save_path_csv(const Path& path, const std::string& filename) {
    std::ofstream out(filename);
    if (!out) throw PathError(PathError::Kind::Io, "cannot write path file " + filename);
    out << "t,value\n";
    const auto ts = path.times();
    const auto xs = path.values();
    for (std::size_t k = 0; k < ts.size(); ++k) {
        out << fmt::format("{:.17g},{:.17g}\n", ts[k], xs[k]);
    }
}

}  // namespace gtd
