#pragma once

#include <cstdint>
#include <limits>

#include "bfrog/pointprocess.hpp"
#include "bfrog/rng.hpp"

namespace bfrog {

/// Time-stepping controls for the hitting engine.
struct StepPolicy {
    double dt_max = 1e-2;
    double safety = 0.25;
    bool bridge_correction = true;
    double tol_hit = 1e-9;
    double dt_min = 1e-8;

    void validate() const;
    /// Surface distance beyond which dt saturates at dt_max.
    double saturation_distance() const noexcept;
};

/// dt = clamp((safety * dist)^2, dt_min, dt_max).
double adaptive_dt(double dist_to_surface, const StepPolicy& policy) noexcept;

/// Probability that a Brownian bridge from x0 to x1 over time dt comes within
/// rho of center, using the one-dimensional reflection formula on the radial
/// gaps d0 = |x0-c| - rho, d1 = |x1-c| - rho: exp(-2 d0 d1 / dt). Exact in
/// d = 1 (same side of the barrier); a radial approximation for d >= 2.
double bridge_hit_prob(const Point& x0, const Point& x1, const Point& center, double rho,
                       double dt) noexcept;

struct HitResult {
    enum class Outcome { hit, timeout };
    Outcome outcome = Outcome::timeout;
    std::uint32_t center = 0;  // grid index of the hit center
    double time = 0.0;         // absolute time of the hit, or t_end on timeout
    Point position{};          // position at that time

    bool hit() const noexcept { return outcome == Outcome::hit; }
};

/// Advances one Brownian particle from (start, t_start) until it comes within
/// r of a live center of `sleeping` or reaches t_end.
///
/// Each step draws isotropic Gaussian increments with variance dt per axis.
/// A hit is declared when the step segment enters a ball (the crossing point
/// is interpolated), or when the bridge correction fires for a nearby center.
/// A start within r + tol_hit of a center is an immediate hit at t_start.
/// When max_coord0 is non-null it is raised to the largest first coordinate
/// visited at step endpoints.
HitResult advance_until_hit(const Point& start, double t_start, double t_end,
                            const SpatialGrid& sleeping, double r, const StepPolicy& policy,
                            Rng& rng, double* max_coord0 = nullptr);

/// First hitting of the r-neighborhood of the sleeping centers, starting at
/// time 0. Throws PreconditionError if start is within r of a center.
HitResult simulate_until_hit(const Point& start, const SpatialGrid& sleeping, double r,
                             double t_max, const StepPolicy& policy, Rng& rng);

}  // namespace bfrog
