#include "bfrog/branching.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bfrog/errors.hpp"
#include "bfrog/percolation.hpp"

namespace bfrog {

namespace {

Point random_direction(int dim, Rng& rng) {
    Point u{};
    double n2 = 0.0;
    do {
        n2 = 0.0;
        for (int k = 0; k < dim; ++k) {
            u[k] = rng.normal();
            n2 += u[k] * u[k];
        }
    } while (n2 == 0.0);
    const double n = std::sqrt(n2);
    for (int k = 0; k < dim; ++k) u[k] /= n;
    return u;
}

}  // namespace

OffspringSample sample_offspring(int dim, double r, double box_side, Rng& rng, const Point* contact) {
    OffspringSample s;
    bool truncated = false;
    std::vector<Point> members;
    const auto size = origin_cluster_size(dim, r, box_side, rng, &truncated, &members);
    s.truncated = truncated;
    s.K = size - 1;
    s.X = s.K + 2;
    // origin_cluster_size reports the origin first.
    s.positions = std::move(members);
    Point c{};
    if (contact) {
        c = *contact;
    } else {
        const Point u = random_direction(dim, rng);
        for (int k = 0; k < dim; ++k) c[k] = r * u[k];
    }
    s.positions.push_back(c);
    for (const auto& p : s.positions) s.max_displacement = std::max(s.max_displacement, norm(p));
    return s;
}

TauSample sample_tau(int dim, double r, double env_side, double t_cap, const StepPolicy& policy,
                     Rng& rng) {
    auto region = Region::centered_cube(dim, env_side);
    region.exclude({Point{}, r});
    const auto env = sample_ppp(region, 1.0, rng);
    const SpatialGrid grid(env, r);
    const auto hit = simulate_until_hit(Point{}, grid, r, t_cap, policy, rng);
    TauSample s;
    s.tau = hit.time;
    s.contact = hit.position;
    if (hit.hit())
        s.center = grid.point(hit.center);
    else
        s.capped = true;
    return s;
}

void BranchingParams::validate() const {
    if (dim < 1 || dim > 3) throw ConfigError("dim must be 1, 2 or 3");
    if (!(r > 0.0)) throw ConfigError("r must be > 0");
    if (gen_max < 0) throw ConfigError("gen_max must be >= 0");
    if (!(env_side > 4.0 * r)) throw ConfigError("env_side must exceed 4r");
    if (!(tau_cap > 0.0)) throw ConfigError("tau_cap must be > 0");
    policy.validate();
}

std::uint64_t BranchingRecord::generation_size(int n) const {
    return static_cast<std::uint64_t>(std::count_if(
        particles.begin(), particles.end(), [n](const Particle& p) { return p.generation == n; }));
}

BranchingRecord simulate_branching(const BranchingParams& params) {
    params.validate();
    const double obox = params.offspring_box > 0.0 ? params.offspring_box : 40.0 * params.r;
    BranchingRecord rec;
    rec.particles.push_back(Particle{});
    for (std::size_t next = 0; next < rec.particles.size(); ++next) {
        if (rec.particles[next].generation >= params.gen_max) continue;
        Rng rng(derive_seed(params.seed, next));
        const auto ts = sample_tau(params.dim, params.r, params.env_side, params.tau_cap,
                                   params.policy, rng);
        if (ts.capped) ++rec.tau_capped;
        const Particle parent = rec.particles[next];
        const double t_branch = parent.birth_time + ts.tau;
        if (ts.capped || t_branch > params.t_max) continue;

        Point contact_rel{};  // contact point relative to the contact center
        for (int k = 0; k < params.dim; ++k) contact_rel[k] = ts.contact[k] - ts.center[k];
        const auto off = sample_offspring(params.dim, params.r, obox, rng, &contact_rel);
        if (off.truncated) ++rec.offspring_truncated;

        if (rec.particles.size() + off.positions.size() > params.population_cap) {
            rec.truncated = true;
            break;
        }
        rec.particles[next].tau = ts.tau;
        rec.particles[next].offspring = off.X;
        for (const auto& rel : off.positions) {
            Particle child;
            child.id = static_cast<std::uint32_t>(rec.particles.size());
            child.parent = parent.id;
            child.generation = parent.generation + 1;
            child.birth_time = t_branch;
            for (int k = 0; k < params.dim; ++k)
                child.birth_pos[k] = parent.birth_pos[k] + ts.center[k] + rel[k];
            rec.particles.push_back(child);
        }
    }
    return rec;
}

GenerationStats generation_stats(const std::vector<BranchingRecord>& records, double t) {
    GenerationStats gs;
    gs.t = t;
    for (const auto& rec : records) {
        int nmax = 0;
        double mmax = 0.0;
        for (const auto& p : rec.particles) {
            if (p.birth_time > t) continue;
            const bool branched_before = !std::isnan(p.tau) && p.birth_time + p.tau <= t;
            if (branched_before) continue;
            nmax = std::max(nmax, p.generation);
            mmax = std::max(mmax, norm(p.birth_pos));
        }
        gs.max_generation.push_back(nmax);
        gs.max_displacement.push_back(mmax);
    }
    return gs;
}

}  // namespace bfrog
