#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "bfrog/motion.hpp"
#include "bfrog/percolation.hpp"
#include "bfrog/pointprocess.hpp"
#include "bfrog/rng.hpp"

namespace bfrog {

struct SimParams {
    int dim = 2;
    double box_side = 40.0;
    double r = 0.8;
    StepPolicy policy{};
    std::uint64_t seed = 1;
    /// Epoch length for the synchronized scheduler; 0 means policy.dt_max.
    double dt_epoch = 0.0;

    void validate() const;
    double epoch() const noexcept { return dt_epoch > 0.0 ? dt_epoch : policy.dt_max; }
};

/// Frog 0 is the origin frog; frog i+1 sits at point i of the configuration.
constexpr std::uint32_t kOriginFrog = 0;
inline std::uint32_t frog_of_point(std::uint32_t point) { return point + 1; }
inline std::uint32_t point_of_frog(std::uint32_t frog) { return frog - 1; }

struct FrogStatus {
    bool active = false;
    double wake_time = std::numeric_limits<double>::infinity();
    Point position{};
};

struct WakeEvent {
    double time = 0.0;
    std::uint32_t frog_id = 0;   // frog whose contact woke the cluster
    std::uint32_t cluster_id = 0;
    std::uint32_t cluster_size = 0;
};

struct Snapshot {
    double time = 0.0;
    std::vector<std::uint32_t> activated;  // point indices in xi_t
    std::vector<Point> activated_points;
    std::vector<Point> active_positions;   // A_t
};

/// The Brownian frog model on a finite box.
///
/// Sleeping frogs sit on a unit Poisson configuration outside B(0, r). Active
/// frogs perform independent Brownian motions; when one comes within r of a
/// sleeping frog, that frog's whole cluster wakes at that instant and each
/// member starts its own motion from its site.
///
/// Time advances in synchronized epochs. Inside an epoch every active frog is
/// advanced against the current sleeping index, hits are processed in
/// (time, frog id) order, and frogs woken mid-epoch are simulated from their
/// wake time. Because waking only removes sleeping centers, a hit on a cluster
/// that is still asleep when popped is exact; a hit on a cluster woken earlier
/// in the epoch is a no-op and the frog resumes from its hit position.
class Simulation {
public:
    /// Samples the configuration on the box minus B(0, r) and activates the
    /// origin frog.
    explicit Simulation(const SimParams& params);
    /// Uses a given configuration. If start_point is set, the process starts
    /// from that point's frog (its cluster awake at time 0) and there is no
    /// origin frog.
    Simulation(const SimParams& params, PointSet points,
               std::optional<std::uint32_t> start_point = std::nullopt);

    const SimParams& params() const noexcept { return params_; }
    double clock() const noexcept { return clock_; }
    const PointSet& points() const noexcept { return points_; }
    const ClusterLabeling& clustering() const noexcept { return clusters_; }
    const SpatialGrid& sleeping_grid() const noexcept { return sleeping_; }
    const FrogStatus& frog(std::uint32_t id) const { return frogs_[id]; }
    std::size_t frog_count() const noexcept { return frogs_.size(); }

    bool point_awake(std::uint32_t i) const { return frogs_[frog_of_point(i)].active; }
    /// Wake time of the cluster holding point i (infinity while asleep).
    double point_wake_time(std::uint32_t i) const { return frogs_[frog_of_point(i)].wake_time; }
    double cluster_wake_time(std::uint32_t c) const { return cluster_wake_[c]; }
    /// |xi_t|: number of activated configuration points.
    std::size_t activated_count() const noexcept { return activated_; }
    std::size_t active_count() const noexcept { return active_ids_.size(); }

    /// Running maximum of the first coordinate over all active-frog positions.
    double front() const noexcept { return front_; }
    /// True once any active frog has been seen outside the box.
    bool exited_box() const noexcept { return exited_; }
    /// max |x| over activated points (0 when none).
    double out_radius() const;
    /// min |x| over sleeping points; the box half-width when none remain.
    double in_radius() const;

    /// Runs until the clock reaches t_end and returns the wake events of this
    /// call in time order.
    std::vector<WakeEvent> advance(double t_end);
    Snapshot snapshot() const;

private:
    void init(std::optional<std::uint32_t> start_point);
    void wake_cluster(std::uint32_t cluster, double time, std::uint32_t by_frog,
                      std::vector<std::uint32_t>& woken, std::vector<WakeEvent>& log);
    void run_epoch(double t1, std::vector<WakeEvent>& log);
    Rng& rng_of(std::uint32_t frog);

    SimParams params_;
    PointSet points_;
    ClusterLabeling clusters_;
    SpatialGrid sleeping_;
    std::vector<FrogStatus> frogs_;
    std::vector<std::optional<Rng>> rngs_;
    std::vector<double> cluster_wake_;
    std::vector<std::uint32_t> active_ids_;  // in wake order
    std::size_t activated_ = 0;
    double clock_ = 0.0;
    double front_ = 0.0;
    bool exited_ = false;
};

struct PassageSample {
    int n = 0;
    std::uint32_t target = 0;  // point index nearest to n * v
    Point point{};
    double T = std::numeric_limits<double>::quiet_NaN();  // wake time of the target's cluster
    bool awake = false;
};

struct PassageRun {
    /// samples[ray][n] for n = 0..n_max.
    std::vector<std::vector<PassageSample>> samples;
    bool partial = false;         // t cap reached with some target asleep
    bool boundary_warning = false;  // box smaller than n_max + 10 r margin
    bool exited_box = false;
    double t_final = 0.0;
};

/// Point index nearest to x (ties to the lower index). Requires a non-empty set.
std::uint32_t nearest_point(const PointSet& ps, const Point& x);

/// Passage times T(0, x_n) along each unit ray, x_n the configuration point
/// nearest n v. Advances in chunks of check_dt until every target is awake or
/// t_cap is reached.
PassageRun passage_times_along_ray(const SimParams& params, const std::vector<Point>& rays,
                                   int n_max, double t_cap, double check_dt = 0.5);
/// Same, on an existing simulation (which is advanced in place).
PassageRun passage_times_along_ray(Simulation& sim, const std::vector<Point>& rays, int n_max,
                                   double t_cap, double check_dt = 0.5);

struct FrontSeries {
    std::vector<std::pair<double, double>> samples;  // (t, R_t), t strictly increasing
    bool exited_box = false;
};

/// R_t sampled every sample_dt on (0, t_end].
FrontSeries front_series(const SimParams& params, double t_end, double sample_dt);
FrontSeries front_series(Simulation& sim, double t_end, double sample_dt);

/// Time until every configuration point in [-half, half]^d is awake, or
/// infinity if t_cap is reached first.
double full_wake_time(const SimParams& params, double half, double t_cap);

}  // namespace bfrog
