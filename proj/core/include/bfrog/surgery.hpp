#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bfrog/pointprocess.hpp"
#include "bfrog/rng.hpp"

namespace bfrog {

enum class GrowthFamily { concentric_balls, brownian_sausage };

struct SurgeryOptions {
    GrowthFamily growth = GrowthFamily::concentric_balls;
    /// Sausage radius and Brownian step (brownian_sausage only).
    double sausage_r = 0.25;
    double sausage_dt = 0.0;  // 0: (r/4)^2 / d
    /// Occupancy-lattice cell; 0 means sausage_r / 20.
    double h = 0.0;
    /// Intensity of the refill process nu (1 for the real construction, 0 for
    /// the diagnostic mode).
    double nu_intensity = 1.0;
};

/// One realization of the Poisson surgery on an observation window.
///
/// G_t grows monotonically with |G_t| = t. For concentric balls G_t is the
/// exact ball of volume t. For the sausage family, G_t is a union of lattice
/// cells: an initial ball grown cell by cell (by distance of the cell centre)
/// up to radius r, then balls of radius r stamped at successive Brownian
/// positions, with each new cell swept along axis 0. tau is the first time a
/// mu-point enters the closure of G_t.
struct SurgeryTrial {
    bool accepted = false;  // false: G left the window before tau
    double tau = 0.0;
    std::uint32_t boundary_index = 0;  // index into mu
    Point boundary_point{};
    double boundary_gap = 0.0;   // distance from the boundary point to the growth surface
    double lattice_area = 0.0;   // measured |G_tau| (sausage mode)
    double h = 0.0;
    PointSet mu;
    PointSet nu;
    std::vector<char> mu_in_closure;  // mu point in closure(G_tau)
    std::vector<char> nu_inside;      // nu point in G_tau
    PointSet eta;                     // mu outside closure + nu inside
};

SurgeryTrial run_surgery_trial(const Region& window, const SurgeryOptions& opt, std::uint64_t seed);

/// mu with its G_tau points deleted and no refill (negative control).
PointSet unspliced(const SurgeryTrial& trial);

/// Area of the union of radius-rho disks at the given centres, measured on a
/// lattice of cell h (cells whose centre is covered). Used for bookkeeping
/// checks.
double lattice_union_area(const std::vector<Point>& centers, double rho, double h);

struct CsrRow {
    std::string name;
    double statistic = 0.0;
    double p_value = 1.0;
    bool pass = true;
};

struct CsrOptions {
    double alpha = 0.01;          // family-wise, Bonferroni across p-value rows
    double max_abs_corr = 0.05;
    double pair_distance = 0.5;   // Ripley-type pair count distance
    std::uint64_t min_samples = 10000;
    std::uint64_t reference_seed = 0x5eedULL;
};

struct CsrReport {
    std::vector<CsrRow> rows;
    double max_abs_corr = 0.0;
    bool pass = false;
};

/// Complete-spatial-randomness suite over point-pattern samples:
/// per-window Poisson(|A|) chi-square and mean z-tests, cross-window count
/// correlations, and a Ripley-type pair count within pair_distance on the
/// first window compared against freshly sampled unit PPPs.
CsrReport csr_test_suite(const std::vector<std::vector<Point>>& samples,
                         const std::vector<Region>& windows, const CsrOptions& opt = {});

}  // namespace bfrog
