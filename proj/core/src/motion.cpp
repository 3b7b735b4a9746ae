#include "bfrog/motion.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>
#include <sstream>

#include "bfrog/errors.hpp"

namespace bfrog {

namespace {

// Candidate centers for the bridge correction lie within this many step
// standard deviations of the step endpoint; beyond it the correction is
// below e^-40.
constexpr double kBridgeReach = 5.0;

}  // namespace

void StepPolicy::validate() const {
    if (!(dt_max > 0.0) || !std::isfinite(dt_max)) throw ConfigError("dt_max must be > 0");
    if (!(safety > 0.0) || safety > 1.0) throw ConfigError("safety must lie in (0, 1]");
    if (!(tol_hit >= 0.0)) throw ConfigError("tol_hit must be >= 0");
    if (!(dt_min > 0.0) || dt_min > dt_max) throw ConfigError("dt_min must lie in (0, dt_max]");
}

double StepPolicy::saturation_distance() const noexcept { return std::sqrt(dt_max) / safety; }

double adaptive_dt(double dist_to_surface, const StepPolicy& policy) noexcept {
    const double s = policy.safety * std::max(0.0, dist_to_surface);
    return std::clamp(s * s, policy.dt_min, policy.dt_max);
}

double bridge_hit_prob(const Point& x0, const Point& x1, const Point& center, double rho,
                       double dt) noexcept {
    const double d0 = dist(x0, center) - rho;
    const double d1 = dist(x1, center) - rho;
    if (d0 <= 0.0 || d1 <= 0.0) return 1.0;
    if (!(dt > 0.0)) return 0.0;
    return std::exp(-2.0 * d0 * d1 / dt);
}

namespace {

// Smallest s in [0,1] with |a + s (b - a) - c| <= r, or a negative value.
double segment_entry(const Point& a, const Point& b, const Point& c, double r) {
    Point u{}, w{};
    for (int k = 0; k < 3; ++k) {
        u[k] = b[k] - a[k];
        w[k] = a[k] - c[k];
    }
    const double A = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    const double B = 2.0 * (u[0] * w[0] + u[1] * w[1] + u[2] * w[2]);
    const double C = w[0] * w[0] + w[1] * w[1] + w[2] * w[2] - r * r;
    if (C <= 0.0) return 0.0;
    if (A <= 0.0) return -1.0;
    const double disc = B * B - 4.0 * A * C;
    if (disc < 0.0) return -1.0;
    const double sq = std::sqrt(disc);
    // Numerically stable smaller root.
    const double q = -0.5 * (B + std::copysign(sq, B));
    double s0 = q / A, s1 = C / q;
    if (s0 > s1) std::swap(s0, s1);
    if (s0 >= 0.0 && s0 <= 1.0) return s0;
    return -1.0;
}

}  // namespace

HitResult advance_until_hit(const Point& start, double t_start, double t_end,
                            const SpatialGrid& sleeping, double r, const StepPolicy& policy,
                            Rng& rng, double* max_coord0) {
    const int d = sleeping.dim();
    const double saturation = policy.saturation_distance();
    HitResult res;
    Point x = start;
    double t = t_start;
    if (max_coord0) *max_coord0 = std::max(*max_coord0, x[0]);
    std::vector<std::pair<double, std::uint32_t>> bridge;

    // Centers near the current position as (squared distance, index); one
    // gather per step serves the entry test, the bridge test and the next
    // step's nearest-center query.
    std::vector<std::pair<double, std::uint32_t>> near;
    auto gather = [&](const Point& p, double rho) {
        near.clear();
        sleeping.for_each_within(p, rho, [&](std::uint32_t c, double d2) { near.emplace_back(d2, c); });
    };
    auto nearest_within = [&](double rho) {
        const double rho2 = rho * rho;
        const std::pair<double, std::uint32_t>* best = nullptr;
        for (const auto& e : near)
            if (e.first <= rho2 && (!best || e < *best)) best = &e;
        return best ? std::optional<Neighbor>(Neighbor{best->second, std::sqrt(best->first)})
                    : std::nullopt;
    };
    gather(x, r + saturation);
    auto nn = nearest_within(r + saturation);

    while (t < t_end) {
        const double gap = nn ? nn->distance - r : saturation;
        if (nn && gap <= policy.tol_hit) {
            res.outcome = HitResult::Outcome::hit;
            res.center = nn->index;
            res.time = t;
            res.position = x;
            return res;
        }
        double dt = adaptive_dt(gap, policy);
        if (t + dt > t_end) dt = t_end - t;
        const double sd = std::sqrt(dt);
        Point y = x;
        for (int k = 0; k < d; ++k) y[k] += sd * rng.normal();

        const double step = dist(x, y);
        const double bridge_reach = r + kBridgeReach * sd;
        gather(y, std::max({r + step, bridge_reach, r + saturation}));

        // Direct entry along the step segment; the earliest entry wins.
        double best_s = 2.0;
        std::uint32_t best_c = 0;
        const double seg2 = (r + step) * (r + step);
        for (const auto& [d2, c] : near) {
            if (d2 > seg2) continue;
            const double s = segment_entry(x, y, sleeping.point(c), r);
            if (s >= 0.0 && (s < best_s || (s == best_s && c < best_c))) {
                best_s = s;
                best_c = c;
            }
        }
        if (best_s <= 1.0) {
            res.outcome = HitResult::Outcome::hit;
            res.center = best_c;
            res.time = t + best_s * dt;
            for (int k = 0; k < d; ++k) res.position[k] = x[k] + best_s * (y[k] - x[k]);
            return res;
        }
        if (policy.bridge_correction) {
            const double b2 = bridge_reach * bridge_reach;
            bridge.clear();
            for (const auto& e : near)
                if (e.first <= b2) bridge.push_back(e);
            std::sort(bridge.begin(), bridge.end());
            for (const auto& [d2, idx] : bridge) {
                const Point& c = sleeping.point(idx);
                const double d0 = dist(x, c) - r;
                const double d1 = std::sqrt(d2) - r;
                const double p = std::exp(-2.0 * d0 * d1 / dt);
                if (rng.uniform() < p) {
                    const double f = d0 / (d0 + d1);
                    Point z{};
                    for (int k = 0; k < d; ++k) z[k] = x[k] + f * (y[k] - x[k]);
                    // Project the interpolated point onto the sphere.
                    const double dz = dist(z, c);
                    Point pos = c;
                    if (dz > 0.0)
                        for (int k = 0; k < d; ++k) pos[k] = c[k] + (z[k] - c[k]) * (r / dz);
                    res.outcome = HitResult::Outcome::hit;
                    res.center = idx;
                    res.time = t + f * dt;
                    res.position = pos;
                    return res;
                }
            }
        }
        x = y;
        t += dt;
        nn = nearest_within(r + saturation);
        if (max_coord0) *max_coord0 = std::max(*max_coord0, x[0]);
    }
    res.outcome = HitResult::Outcome::timeout;
    res.time = t_end;
    res.position = x;
    return res;
}

HitResult simulate_until_hit(const Point& start, const SpatialGrid& sleeping, double r,
                             double t_max, const StepPolicy& policy, Rng& rng) {
    policy.validate();
    if (!(r > 0.0)) throw PreconditionError("hit radius must be > 0");
    if (const auto nn = sleeping.nearest(start, r); nn) {
        std::ostringstream os;
        os << "start lies within r of center " << nn->index << " (distance " << nn->distance
           << ")";
        throw PreconditionError(os.str());
    }
    return advance_until_hit(start, 0.0, t_max, sleeping, r, policy, rng);
}

}  // namespace bfrog
