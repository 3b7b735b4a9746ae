#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "bfrog/motion.hpp"
#include "bfrog/pointprocess.hpp"
#include "bfrog/rng.hpp"

namespace bfrog {

/// Offspring of one branching event, placed relative to the contact center.
struct OffspringSample {
    std::uint64_t K = 0;  // extra cluster members beyond the contact center
    std::uint64_t X = 2;  // K + 2
    /// Offspring positions relative to the contact center: the cluster members
    /// (contact center first, at the origin) and the contact point at distance r.
    std::vector<Point> positions;
    bool truncated = false;
    double max_displacement = 0.0;  // max |position| over offspring
};

/// Adds a point at the origin to a fresh unit PPP on a cube of side box_side
/// and takes its cluster; the contact point is placed at distance r in a
/// uniform direction (or at `contact` when provided).
OffspringSample sample_offspring(int dim, double r, double box_side, Rng& rng,
                                 const Point* contact = nullptr);

struct TauSample {
    double tau = 0.0;
    Point center{};   // contact center relative to the start
    Point contact{};  // particle position at tau relative to the start
    bool capped = false;
};

/// First time a Brownian particle started at the origin comes within r of a
/// fresh unit PPP on a cube of side env_side minus B(0, r).
TauSample sample_tau(int dim, double r, double env_side, double t_cap, const StepPolicy& policy,
                     Rng& rng);

struct BranchingParams {
    int dim = 2;
    double r = 0.7;
    int gen_max = 5;
    double t_max = std::numeric_limits<double>::infinity();
    double env_side = 16.0;       // environment cube for tau
    double offspring_box = 0.0;   // 0 means 40 r
    double tau_cap = 1e3;
    StepPolicy policy{};
    std::uint64_t population_cap = 2'000'000;
    std::uint64_t seed = 1;

    void validate() const;
};

struct Particle {
    std::uint32_t id = 0;
    std::int64_t parent = -1;
    int generation = 0;
    double birth_time = 0.0;
    Point birth_pos{};
    /// Waiting time until this particle branches (NaN if it did not branch
    /// within the simulated horizon).
    double tau = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t offspring = 0;
};

struct BranchingRecord {
    std::vector<Particle> particles;  // ids in creation (breadth-first) order
    bool truncated = false;           // population cap hit
    std::uint64_t tau_capped = 0;
    std::uint64_t offspring_truncated = 0;

    /// Number of particles in generation n.
    std::uint64_t generation_size(int n) const;
};

/// Dominating branching process with an independent environment per
/// particle: each particle waits tau (sample_tau), then is replaced by X
/// offspring placed by sample_offspring around the contact center, one of
/// them at the contact point. Particles branch while generation < gen_max and
/// the branching time stays within t_max.
BranchingRecord simulate_branching(const BranchingParams& params);

struct GenerationStats {
    double t = 0.0;
    std::vector<int> max_generation;      // N_t per record
    std::vector<double> max_displacement; // M_t per record
};

/// For each record: N_t = largest generation among particles alive at t
/// (born <= t and not yet branched) and M_t = max |birth position| among them.
GenerationStats generation_stats(const std::vector<BranchingRecord>& records, double t);

}  // namespace bfrog
