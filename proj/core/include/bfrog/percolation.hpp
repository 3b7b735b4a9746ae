#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bfrog/pointprocess.hpp"
#include "bfrog/rng.hpp"

namespace bfrog {

/// Union-find with union by size and path halving.
class DisjointSets {
public:
    explicit DisjointSets(std::size_t n);
    std::uint32_t find(std::uint32_t x) noexcept;
    bool unite(std::uint32_t a, std::uint32_t b) noexcept;

private:
    std::vector<std::uint32_t> parent_;
    std::vector<std::uint32_t> size_;
};

/// Partition of a point set into Gilbert-graph components at a connection
/// radius (edge iff center distance <= radius).
struct ClusterLabeling {
    std::vector<std::uint32_t> label;                 // point -> cluster id
    std::vector<std::vector<std::uint32_t>> members;  // cluster id -> sorted point ids
    double connection_radius = 0.0;

    std::size_t cluster_count() const noexcept { return members.size(); }
    /// Members of the cluster holding point x (x included). Throws
    /// PreconditionError for an unknown index.
    const std::vector<std::uint32_t>& cluster_containing(std::uint32_t x) const;
};

/// Cluster ids are assigned in order of each cluster's smallest point index.
ClusterLabeling clusters(const PointSet& ps, double r);
ClusterLabeling clusters(int dim, std::span<const Point> pts, double r);

/// Axis-aligned box crossed along axis 0 (left side lo[0], right side hi[0]).
struct CrossingSpec {
    Point lo{};
    Point hi{};
    double radius = 1.0;
};

struct CrossingResult {
    bool crosses = false;
    /// Point indices x_0..x_k of a witness chain when crosses is true.
    std::vector<std::uint32_t> chain;
};

/// Sponge crossing: a chain of points with x_0 within r of the left side, x_k
/// within r of the right side and consecutive hops <= r. Points are expected
/// to be clipped to the rectangle already.
CrossingResult sponge_crossing_exists(const PointSet& ps, const CrossingSpec& spec);
/// True iff the chain satisfies all three distance conditions.
bool is_valid_crossing(const PointSet& ps, const CrossingSpec& spec,
                       const std::vector<std::uint32_t>& chain);

enum class CrossingMode { any, leftmost_from_ball };

struct ProportionEstimate {
    double p = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::uint64_t successes = 0;
    std::uint64_t trials = 0;
};

/// Wilson score interval at normal quantile z.
ProportionEstimate wilson_interval(std::uint64_t successes, std::uint64_t trials,
                                   double z = 1.959963984540054);

/// Monte Carlo crossing probability in d = 2.
///
/// mode any: crossing of [0,n] x [0, aspect*n].
/// mode leftmost_from_ball: a point placed uniformly in the left strip of
/// width r (at mid height) starts a chain, using only points to its right,
/// that reaches within r of the line at horizontal displacement n - r.
/// Replica i uses the substream derive_seed(seed, i).
ProportionEstimate estimate_crossing_prob(double r, double n, double aspect, CrossingMode mode,
                                          std::uint64_t replicas, std::uint64_t seed,
                                          unsigned workers = 1);

/// Left-to-right sweep over [0, n] x [0, height] that keeps the points within
/// r of the sweep line together with their connectivity and whether they are
/// joined to the left side. Edges only span r horizontally, so this state is
/// all the future of the sweep depends on.
class CrossingSweep {
public:
    CrossingSweep(double r, double n, double height);

    /// Adds the points with first coordinate in (x(), x_to]. The caller
    /// supplies all of them.
    void advance(double x_to, std::span<const Point> slab);
    /// Same, with the slab sampled as a unit PPP.
    void advance_random(double x_to, Rng& rng);

    double x() const noexcept { return x_; }
    bool crossed() const noexcept { return crossed_; }
    /// False once the sweep is past r, no strip point is joined to the left
    /// side and no crossing was found: the crossing is then impossible.
    bool alive() const noexcept;

private:
    double r_, n_, height_;
    double x_ = 0.0;
    bool crossed_ = false;
    std::vector<Point> strip_;
    std::vector<std::uint32_t> comp_;  // component label per strip point
    std::vector<char> comp_left_;      // per label
};

/// Crossing decided by the sweep with slabs of the given width; agrees with
/// sponge_crossing_exists on [0, n] x [0, height].
bool sweep_crossing(const PointSet& ps, double r, double n, double height, double slab);

struct SplittingEstimate {
    double p = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double se = 0.0;
    double log_p = 0.0;   // -inf when p == 0
    double log_se = 0.0;  // delta method
    std::vector<double> run_estimates;
    std::uint64_t effort = 0;
    int levels = 0;
};

/// Crossing probability of [0, n] x [0, aspect n] by fixed-effort multilevel
/// splitting on the sweep position. Each run pushes `effort` sweeps through
/// `levels` equal stages, resampling survivors at every stage boundary; the
/// product of survival fractions is unbiased. The CI is the Student-t
/// interval over independent runs (run i uses derive_seed(seed, i)).
SplittingEstimate estimate_crossing_prob_splitting(double r, double n, double aspect, int levels,
                                                   std::uint64_t effort, std::uint64_t runs,
                                                   std::uint64_t seed, unsigned workers = 1);

struct CriticalRadiusResult {
    double r_hat = 0.0;
    double tol = 0.0;
    double n = 0.0;
    int iterations = 0;
    /// (r, p_hat) at every evaluated radius, in evaluation order.
    std::vector<std::pair<double, double>> trace;
};

/// Bisection on the n x n crossing probability (d = 2) until the bracket
/// around p = 1/2 is narrower than tol. All radii are evaluated on the same
/// sampled configurations, so p_hat(r) is monotone. Throws ComputationError
/// (message includes the trace) if the bracket cannot be found or the
/// iteration cap is hit.
CriticalRadiusResult estimate_critical_radius(double n, std::uint64_t replicas, double tol,
                                              std::uint64_t seed, double r_lo = 0.8,
                                              double r_hi = 1.6, int max_iter = 40,
                                              unsigned workers = 1);

struct ClusterSizeSamples {
    std::vector<std::uint64_t> sizes;  // origin cluster point counts (origin included)
    std::uint64_t truncated = 0;       // discarded replicas touching the box boundary
    std::uint64_t attempted = 0;
    bool truncation_warning = false;   // truncated / attempted > 1%
};

/// Size of the cluster of the origin after adding the origin to a fresh unit
/// PPP on a cube of the given side centered at 0.
std::uint64_t origin_cluster_size(int dim, double r, double box_side, Rng& rng,
                                  bool* truncated = nullptr,
                                  std::vector<Point>* members = nullptr);

ClusterSizeSamples cluster_size_samples(int dim, double r, double box_side,
                                        std::uint64_t replicas, std::uint64_t seed,
                                        unsigned workers = 1);

}  // namespace bfrog
