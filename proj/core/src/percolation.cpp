#include "bfrog/percolation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "bfrog/errors.hpp"
#include "bfrog/parallel.hpp"
#include "bfrog/stats.hpp"

namespace bfrog {

DisjointSets::DisjointSets(std::size_t n) : parent_(n), size_(n, 1) {
    for (std::size_t i = 0; i < n; ++i) parent_[i] = static_cast<std::uint32_t>(i);
}

std::uint32_t DisjointSets::find(std::uint32_t x) noexcept {
    while (parent_[x] != x) {
        parent_[x] = parent_[parent_[x]];
        x = parent_[x];
    }
    return x;
}

bool DisjointSets::unite(std::uint32_t a, std::uint32_t b) noexcept {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
}

const std::vector<std::uint32_t>& ClusterLabeling::cluster_containing(std::uint32_t x) const {
    if (x >= label.size()) {
        std::ostringstream os;
        os << "point index " << x << " out of range (" << label.size() << " points)";
        throw PreconditionError(os.str());
    }
    return members[label[x]];
}

ClusterLabeling clusters(int dim, std::span<const Point> pts, double r) {
    if (!(r > 0.0)) throw PreconditionError("connection radius must be > 0");
    const SpatialGrid grid(dim, pts, r);
    DisjointSets ds(pts.size());
    for (std::uint32_t i = 0; i < pts.size(); ++i) {
        grid.for_each_within(pts[i], r, [&](std::uint32_t j, double) {
            if (j > i) ds.unite(i, j);
        });
    }
    ClusterLabeling cl;
    cl.connection_radius = r;
    cl.label.resize(pts.size());
    std::vector<std::uint32_t> root_to_id(pts.size(), 0xffffffffu);
    for (std::uint32_t i = 0; i < pts.size(); ++i) {
        const auto root = ds.find(i);
        if (root_to_id[root] == 0xffffffffu) {
            root_to_id[root] = static_cast<std::uint32_t>(cl.members.size());
            cl.members.emplace_back();
        }
        cl.label[i] = root_to_id[root];
        cl.members[cl.label[i]].push_back(i);
    }
    return cl;
}

ClusterLabeling clusters(const PointSet& ps, double r) {
    return clusters(ps.dim(), ps.points, r);
}

// ---------------------------------------------------------------------------
// Sponge crossings

namespace {

// BFS over the Gilbert graph from every source, restricted to `allowed`.
// Returns the chain (source first) to the first reached target, if any.
template <class IsSource, class IsTarget, class Allowed>
std::vector<std::uint32_t> bfs_chain(const SpatialGrid& grid, double r, IsSource is_source,
                                     IsTarget is_target, Allowed allowed) {
    const auto pts = grid.points();
    constexpr std::uint32_t kNone = 0xffffffffu;
    std::vector<std::uint32_t> parent(pts.size(), kNone);
    std::vector<char> seen(pts.size(), 0);
    std::deque<std::uint32_t> queue;
    for (std::uint32_t i = 0; i < pts.size(); ++i) {
        if (allowed(i) && is_source(i)) {
            seen[i] = 1;
            queue.push_back(i);
        }
    }
    while (!queue.empty()) {
        const auto u = queue.front();
        queue.pop_front();
        if (is_target(u)) {
            std::vector<std::uint32_t> chain;
            for (auto v = u; v != kNone; v = parent[v]) chain.push_back(v);
            std::reverse(chain.begin(), chain.end());
            return chain;
        }
        grid.for_each_within(pts[u], r, [&](std::uint32_t v, double) {
            if (!seen[v] && allowed(v)) {
                seen[v] = 1;
                parent[v] = u;
                queue.push_back(v);
            }
        });
    }
    return {};
}

}  // namespace

CrossingResult sponge_crossing_exists(const PointSet& ps, const CrossingSpec& spec) {
    CrossingResult res;
    if (ps.empty()) return res;
    const double r = spec.radius;
    const SpatialGrid grid(ps.dim(), ps.points, r);
    const auto& pts = ps.points;
    res.chain = bfs_chain(
        grid, r, [&](std::uint32_t i) { return pts[i][0] - spec.lo[0] <= r; },
        [&](std::uint32_t i) { return spec.hi[0] - pts[i][0] <= r; },
        [](std::uint32_t) { return true; });
    res.crosses = !res.chain.empty();
    return res;
}

bool is_valid_crossing(const PointSet& ps, const CrossingSpec& spec,
                       const std::vector<std::uint32_t>& chain) {
    if (chain.empty()) return false;
    const auto& pts = ps.points;
    const double r = spec.radius;
    if (!(pts[chain.front()][0] - spec.lo[0] <= r)) return false;
    if (!(spec.hi[0] - pts[chain.back()][0] <= r)) return false;
    for (std::size_t j = 1; j < chain.size(); ++j)
        if (!(dist2(pts[chain[j - 1]], pts[chain[j]]) <= r * r)) return false;
    return true;
}

ProportionEstimate wilson_interval(std::uint64_t successes, std::uint64_t trials, double z) {
    ProportionEstimate est;
    est.successes = successes;
    est.trials = trials;
    if (trials == 0) {
        est.ci_hi = 1.0;
        return est;
    }
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    est.p = p;
    est.ci_lo = std::max(0.0, centre - half);
    est.ci_hi = std::min(1.0, centre + half);
    return est;
}

namespace {

bool crossing_replica(double r, double n, double aspect, CrossingMode mode, Rng& rng) {
    const double height = aspect * n;
    if (mode == CrossingMode::any) {
        const auto ps = sample_ppp(Region::box(2, {0.0, 0.0, 0.0}, {n, height, 0.0}), 1.0, rng);
        return sponge_crossing_exists(ps, {{0.0, 0.0, 0.0}, {n, height, 0.0}, r}).crosses;
    }
    // leftmost_from_ball: the conditioned point y sits in the left strip of
    // width r; the target line is at y_x + (n - r).
    const Point y{rng.uniform(0.0, r), 0.5 * height, 0.0};
    const double right = y[0] + (n - r);
    auto ps = sample_ppp(Region::box(2, {0.0, 0.0, 0.0}, {r + n, height, 0.0}), 1.0, rng);
    ps.points.push_back(y);
    const auto src = static_cast<std::uint32_t>(ps.points.size() - 1);
    const SpatialGrid grid(2, ps.points, r);
    const auto& pts = ps.points;
    const auto chain = bfs_chain(
        grid, r, [&](std::uint32_t i) { return i == src; },
        [&](std::uint32_t i) { return right - pts[i][0] <= r; },
        [&](std::uint32_t i) { return pts[i][0] >= y[0] && pts[i][0] <= right; });
    return !chain.empty();
}

}  // namespace

ProportionEstimate estimate_crossing_prob(double r, double n, double aspect, CrossingMode mode,
                                          std::uint64_t replicas, std::uint64_t seed,
                                          unsigned workers) {
    if (!(n > r)) throw PreconditionError("crossing estimate requires n > r");
    if (!(r > 0.0)) throw PreconditionError("crossing estimate requires r > 0");
    if (replicas < 1) throw PreconditionError("replicas must be >= 1");
    if (!(aspect > 0.0)) throw PreconditionError("aspect must be > 0");
    std::vector<char> hit(replicas, 0);
    parallel_for(replicas, workers, [&](std::uint64_t i) {
        Rng rng(derive_seed(seed, i));
        hit[i] = crossing_replica(r, n, aspect, mode, rng) ? 1 : 0;
    });
    return wilson_interval(static_cast<std::uint64_t>(std::count(hit.begin(), hit.end(), 1)),
                           replicas);
}

CrossingSweep::CrossingSweep(double r, double n, double height)
    : r_(r), n_(n), height_(height) {
    if (!(r > 0.0) || !(n > r) || !(height > 0.0))
        throw PreconditionError("sweep requires r > 0, n > r and height > 0");
}

bool CrossingSweep::alive() const noexcept {
    if (crossed_ || x_ < r_) return true;
    for (auto c : comp_)
        if (comp_left_[c]) return true;
    return false;
}

void CrossingSweep::advance(double x_to, std::span<const Point> slab) {
    if (crossed_) {
        x_ = x_to;
        return;
    }
    const auto m = static_cast<std::uint32_t>(strip_.size());
    std::vector<Point> all(strip_);
    all.insert(all.end(), slab.begin(), slab.end());
    const auto total = static_cast<std::uint32_t>(all.size());

    DisjointSets ds(total);
    std::vector<std::uint32_t> first(comp_left_.size(), 0xffffffffu);
    for (std::uint32_t i = 0; i < m; ++i) {
        auto& f = first[comp_[i]];
        if (f == 0xffffffffu)
            f = i;
        else
            ds.unite(f, i);
    }
    if (total > m) {
        const SpatialGrid grid(2, all, r_);
        for (std::uint32_t k = m; k < total; ++k)
            grid.for_each_within(all[k], r_, [&](std::uint32_t j, double) { ds.unite(k, j); });
    }

    std::vector<char> left(total, 0);
    for (std::uint32_t i = 0; i < total; ++i) {
        const bool l = i < m ? comp_left_[comp_[i]] != 0 : all[i][0] <= r_;
        if (l) left[ds.find(i)] = 1;
    }
    for (std::uint32_t i = 0; i < total; ++i)
        if (left[ds.find(i)] && n_ - all[i][0] <= r_) crossed_ = true;

    x_ = x_to;
    std::vector<Point> strip;
    std::vector<std::uint32_t> comp;
    std::vector<char> comp_left;
    std::vector<std::uint32_t> relabel(total, 0xffffffffu);
    for (std::uint32_t i = 0; i < total; ++i) {
        if (!(all[i][0] > x_ - r_)) continue;
        const auto root = ds.find(i);
        if (relabel[root] == 0xffffffffu) {
            relabel[root] = static_cast<std::uint32_t>(comp_left.size());
            comp_left.push_back(left[root]);
        }
        strip.push_back(all[i]);
        comp.push_back(relabel[root]);
    }
    strip_ = std::move(strip);
    comp_ = std::move(comp);
    comp_left_ = std::move(comp_left);
}

void CrossingSweep::advance_random(double x_to, Rng& rng) {
    const double lo = x_, hi = std::min(x_to, n_);
    std::vector<Point> slab;
    if (hi > lo) {
        const auto count = rng.poisson((hi - lo) * height_);
        slab.resize(count);
        for (auto& p : slab) p = Point{rng.uniform(lo, hi), rng.uniform(0.0, height_), 0.0};
    }
    advance(x_to, slab);
}

bool sweep_crossing(const PointSet& ps, double r, double n, double height, double slab) {
    if (!(slab > 0.0)) throw PreconditionError("slab width must be > 0");
    std::vector<Point> pts = ps.points;
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a[0] < b[0]; });
    CrossingSweep sweep(r, n, height);
    std::size_t next = 0;
    while (sweep.x() < n && sweep.alive() && !sweep.crossed()) {
        const double x_to = std::min(n, sweep.x() + slab);
        const std::size_t begin = next;
        while (next < pts.size() && (pts[next][0] <= x_to || x_to >= n)) ++next;
        sweep.advance(x_to, std::span<const Point>(pts.data() + begin, next - begin));
    }
    return sweep.crossed();
}

SplittingEstimate estimate_crossing_prob_splitting(double r, double n, double aspect, int levels,
                                                   std::uint64_t effort, std::uint64_t runs,
                                                   std::uint64_t seed, unsigned workers) {
    if (!(n > r) || !(r > 0.0) || !(aspect > 0.0)) throw PreconditionError("invalid crossing box");
    if (levels < 1 || effort < 1 || runs < 2)
        throw PreconditionError("splitting needs levels >= 1, effort >= 1 and runs >= 2");
    const double height = aspect * n;
    SplittingEstimate est;
    est.effort = effort;
    est.levels = levels;
    est.run_estimates.assign(runs, 0.0);

    parallel_for(runs, workers, [&](std::uint64_t run) {
        Rng rng(derive_seed(seed, run));
        std::vector<CrossingSweep> pop(effort, CrossingSweep(r, n, height));
        double p = 1.0;
        for (int level = 1; level <= levels && p > 0.0; ++level) {
            const double stage_end = n * level / levels;
            std::vector<std::size_t> survivors;
            for (std::size_t k = 0; k < pop.size(); ++k) {
                auto& s = pop[k];
                while (s.x() < stage_end && s.alive() && !s.crossed())
                    s.advance_random(std::min(stage_end, s.x() + r), rng);
                const bool ok = level == levels ? s.crossed() : s.alive();
                if (ok) survivors.push_back(k);
            }
            p *= static_cast<double>(survivors.size()) / static_cast<double>(effort);
            if (survivors.empty() || level == levels) break;
            std::vector<CrossingSweep> next;
            next.reserve(effort);
            for (std::uint64_t k = 0; k < effort; ++k)
                next.push_back(pop[survivors[rng.below(survivors.size())]]);
            pop = std::move(next);
        }
        est.run_estimates[run] = p;
    });

    const double m = mean(est.run_estimates);
    const double sd = std::sqrt(variance(est.run_estimates));
    est.p = m;
    est.se = sd / std::sqrt(static_cast<double>(runs));
    const double tq = t_quantile(0.975, static_cast<double>(runs - 1));
    est.ci_lo = std::max(0.0, m - tq * est.se);
    est.ci_hi = std::min(1.0, m + tq * est.se);
    est.log_p = m > 0.0 ? std::log(m) : -std::numeric_limits<double>::infinity();
    est.log_se = m > 0.0 ? est.se / m : std::numeric_limits<double>::infinity();
    return est;
}

CriticalRadiusResult estimate_critical_radius(double n, std::uint64_t replicas, double tol,
                                              std::uint64_t seed, double r_lo, double r_hi,
                                              int max_iter, unsigned workers) {
    if (!(n > 0.0) || replicas < 1 || !(tol > 0.0) || !(r_lo > 0.0) || !(r_lo < r_hi))
        throw ConfigError("invalid critical-radius parameters");

    std::vector<PointSet> configs(replicas);
    parallel_for(replicas, workers, [&](std::uint64_t i) {
        Rng rng(derive_seed(seed, i));
        configs[i] = sample_ppp(Region::box(2, {0.0, 0.0, 0.0}, {n, n, 0.0}), 1.0, rng);
    });

    CriticalRadiusResult res;
    res.tol = tol;
    res.n = n;
    auto p_hat = [&](double r) {
        std::vector<char> hit(replicas, 0);
        parallel_for(replicas, workers, [&](std::uint64_t i) {
            hit[i] = sponge_crossing_exists(configs[i], {{0.0, 0.0, 0.0}, {n, n, 0.0}, r}).crosses;
        });
        const double p = static_cast<double>(std::count(hit.begin(), hit.end(), 1)) /
                         static_cast<double>(replicas);
        res.trace.emplace_back(r, p);
        return p;
    };
    auto fail = [&](const std::string& why) {
        std::ostringstream os;
        os << why << "; trace:";
        for (const auto& [r, p] : res.trace) os << " (" << r << ", " << p << ")";
        throw ComputationError(os.str());
    };

    double lo = r_lo, hi = r_hi;
    if (p_hat(lo) >= 0.5) fail("crossing probability already >= 1/2 at the lower bracket");
    if (p_hat(hi) < 0.5) fail("crossing probability below 1/2 at the upper bracket");
    while (hi - lo > tol) {
        if (res.iterations >= max_iter) fail("bisection iteration cap reached");
        ++res.iterations;
        const double mid = 0.5 * (lo + hi);
        if (p_hat(mid) < 0.5)
            lo = mid;
        else
            hi = mid;
    }
    res.r_hat = 0.5 * (lo + hi);
    return res;
}

// ---------------------------------------------------------------------------
// Origin cluster sizes

std::uint64_t origin_cluster_size(int dim, double r, double box_side, Rng& rng, bool* truncated,
                                  std::vector<Point>* members) {
    auto ps = sample_ppp(Region::centered_cube(dim, box_side), 1.0, rng);
    ps.points.push_back(Point{});
    const auto origin = static_cast<std::uint32_t>(ps.points.size() - 1);
    const SpatialGrid grid(dim, ps.points, r);
    const auto& pts = ps.points;
    const double half = 0.5 * box_side;

    std::vector<char> seen(pts.size(), 0);
    std::vector<std::uint32_t> stack{origin};
    seen[origin] = 1;
    std::uint64_t count = 0;
    bool touches = false;
    if (members) members->clear();
    while (!stack.empty()) {
        const auto u = stack.back();
        stack.pop_back();
        ++count;
        if (members) members->push_back(pts[u]);
        for (int k = 0; k < dim; ++k)
            if (half - std::abs(pts[u][k]) <= r) touches = true;
        grid.for_each_within(pts[u], r, [&](std::uint32_t v, double) {
            if (!seen[v]) {
                seen[v] = 1;
                stack.push_back(v);
            }
        });
    }
    if (truncated) *truncated = touches;
    return count;
}

ClusterSizeSamples cluster_size_samples(int dim, double r, double box_side,
                                        std::uint64_t replicas, std::uint64_t seed,
                                        unsigned workers) {
    if (!(r > 0.0)) throw PreconditionError("connection radius must be > 0");
    if (!(box_side > 2.0 * r)) throw PreconditionError("box_side must exceed 2r");
    std::vector<std::uint64_t> size(replicas, 0);
    std::vector<char> trunc(replicas, 0);
    parallel_for(replicas, workers, [&](std::uint64_t i) {
        Rng rng(derive_seed(seed, i));
        bool t = false;
        size[i] = origin_cluster_size(dim, r, box_side, rng, &t);
        trunc[i] = t ? 1 : 0;
    });
    ClusterSizeSamples out;
    out.attempted = replicas;
    for (std::uint64_t i = 0; i < replicas; ++i) {
        if (trunc[i])
            ++out.truncated;
        else
            out.sizes.push_back(size[i]);
    }
    out.truncation_warning =
        static_cast<double>(out.truncated) > 0.01 * static_cast<double>(out.attempted);
    return out;
}

}  // namespace bfrog
