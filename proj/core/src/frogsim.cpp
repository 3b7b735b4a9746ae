#include "bfrog/frogsim.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <tuple>

#include "bfrog/errors.hpp"

namespace bfrog {

namespace {

constexpr std::uint64_t kPointStream = 0;
constexpr std::uint64_t kFrogStream = 1;

}  // namespace

void SimParams::validate() const {
    if (dim < 1 || dim > 3) throw ConfigError("dim must be 1, 2 or 3");
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("r must be finite and > 0");
    if (!(box_side > 4.0 * r) || !std::isfinite(box_side))
        throw ConfigError("box_side must exceed 4r");
    if (dt_epoch < 0.0) throw ConfigError("dt_epoch must be >= 0");
    policy.validate();
}

Simulation::Simulation(const SimParams& params) : params_(params) {
    params_.validate();
    Rng rng(derive_seed(params_.seed, kPointStream));
    auto region = Region::centered_cube(params_.dim, params_.box_side);
    region.exclude({Point{}, params_.r});
    points_ = sample_ppp(region, 1.0, rng);
    init(std::nullopt);
}

Simulation::Simulation(const SimParams& params, PointSet points,
                       std::optional<std::uint32_t> start_point)
    : params_(params), points_(std::move(points)) {
    params_.validate();
    if (points_.dim() != params_.dim) throw ConfigError("configuration dimension mismatch");
    if (start_point && *start_point >= points_.size())
        throw PreconditionError("start point index out of range");
    init(start_point);
}

void Simulation::init(std::optional<std::uint32_t> start_point) {
    clusters_ = clusters(points_, params_.r);
    sleeping_ = SpatialGrid(points_, params_.r);
    frogs_.assign(points_.size() + 1, FrogStatus{});
    rngs_.assign(points_.size() + 1, std::nullopt);
    cluster_wake_.assign(clusters_.cluster_count(), std::numeric_limits<double>::infinity());
    for (std::uint32_t i = 0; i < points_.size(); ++i) frogs_[frog_of_point(i)].position = points_[i];
    front_ = -std::numeric_limits<double>::infinity();

    if (!start_point) {
        auto& origin = frogs_[kOriginFrog];
        origin.active = true;
        origin.wake_time = 0.0;
        origin.position = Point{};
        active_ids_.push_back(kOriginFrog);
        front_ = 0.0;
    } else {
        std::vector<std::uint32_t> woken;
        std::vector<WakeEvent> log;
        wake_cluster(clusters_.label[*start_point], 0.0, frog_of_point(*start_point), woken, log);
    }
}

Rng& Simulation::rng_of(std::uint32_t frog) {
    auto& slot = rngs_[frog];
    if (!slot) slot.emplace(derive_seed(params_.seed, kFrogStream, frog));
    return *slot;
}

double Simulation::out_radius() const {
    double out = 0.0;
    for (std::uint32_t i = 0; i < points_.size(); ++i)
        if (point_awake(i)) out = std::max(out, norm(points_[i]));
    return out;
}

double Simulation::in_radius() const {
    double in = 0.5 * params_.box_side;
    for (std::uint32_t i = 0; i < points_.size(); ++i)
        if (!point_awake(i)) in = std::min(in, norm(points_[i]));
    return in;
}

void Simulation::wake_cluster(std::uint32_t cluster, double time, std::uint32_t by_frog,
                              std::vector<std::uint32_t>& woken, std::vector<WakeEvent>& log) {
    const auto& members = clusters_.members[cluster];
    cluster_wake_[cluster] = time;
    for (std::uint32_t p : members) {
        const auto id = frog_of_point(p);
        auto& f = frogs_[id];
        f.active = true;
        f.wake_time = time;
        f.position = points_[p];
        sleeping_.erase(p);
        active_ids_.push_back(id);
        woken.push_back(id);
        front_ = std::max(front_, points_[p][0]);
    }
    activated_ += members.size();
    log.push_back({time, by_frog, cluster, static_cast<std::uint32_t>(members.size())});
}

void Simulation::run_epoch(double t1, std::vector<WakeEvent>& log) {
    using Pending = std::tuple<double, std::uint32_t, std::uint32_t>;  // time, frog, center
    std::priority_queue<Pending, std::vector<Pending>, std::greater<>> pending;
    const double r = params_.r;
    const double half = 0.5 * params_.box_side;
    const int d = params_.dim;

    auto run = [&](std::uint32_t id, double from) {
        auto& f = frogs_[id];
        const auto res =
            advance_until_hit(f.position, from, t1, sleeping_, r, params_.policy, rng_of(id), &front_);
        f.position = res.position;
        if (res.hit()) pending.emplace(res.time, id, res.center);
    };

    const std::size_t initial = active_ids_.size();
    for (std::size_t k = 0; k < initial; ++k) run(active_ids_[k], clock_);

    std::vector<std::uint32_t> woken;
    while (!pending.empty()) {
        const auto [time, id, center] = pending.top();
        pending.pop();
        const auto c = clusters_.label[center];
        if (!std::isfinite(cluster_wake_[c])) {
            woken.clear();
            wake_cluster(c, time, id, woken, log);
            for (auto w : woken) run(w, time);
        }
        run(id, time);
    }

    for (auto id : active_ids_) {
        const auto& p = frogs_[id].position;
        for (int k = 0; k < d; ++k)
            if (std::abs(p[k]) > half) exited_ = true;
    }
    clock_ = t1;
}

std::vector<WakeEvent> Simulation::advance(double t_end) {
    std::vector<WakeEvent> log;
    const double epoch = params_.epoch();
    while (clock_ < t_end) {
        const double t1 = std::min(t_end, clock_ + epoch);
        run_epoch(t1, log);
    }
    return log;
}

Snapshot Simulation::snapshot() const {
    Snapshot s;
    s.time = clock_;
    for (std::uint32_t i = 0; i < points_.size(); ++i)
        if (point_awake(i)) {
            s.activated.push_back(i);
            s.activated_points.push_back(points_[i]);
        }
    for (std::uint32_t id = 0; id < frogs_.size(); ++id)
        if (frogs_[id].active) s.active_positions.push_back(frogs_[id].position);
    return s;
}

// ---------------------------------------------------------------------------

std::uint32_t nearest_point(const PointSet& ps, const Point& x) {
    if (ps.empty()) throw PreconditionError("nearest_point on an empty configuration");
    std::uint32_t best = 0;
    double best2 = dist2(ps.points[0], x);
    for (std::uint32_t i = 1; i < ps.size(); ++i) {
        const double d2 = dist2(ps.points[i], x);
        if (d2 < best2) {
            best2 = d2;
            best = i;
        }
    }
    return best;
}

PassageRun passage_times_along_ray(Simulation& sim, const std::vector<Point>& rays, int n_max,
                                   double t_cap, double check_dt) {
    if (n_max < 0) throw PreconditionError("n_max must be >= 0");
    if (!(check_dt > 0.0)) throw PreconditionError("check_dt must be > 0");
    const auto& params = sim.params();
    PassageRun run;
    run.boundary_warning = 0.5 * params.box_side < n_max + 10.0 * params.r;
    run.samples.resize(rays.size());
    for (std::size_t k = 0; k < rays.size(); ++k) {
        const Point& v = rays[k];
        const double len = norm(v);
        if (!(len > 0.0)) throw PreconditionError("ray direction must be nonzero");
        for (int n = 0; n <= n_max; ++n) {
            Point target{};
            for (int a = 0; a < params.dim; ++a) target[a] = n * v[a] / len;
            PassageSample s;
            s.n = n;
            s.target = nearest_point(sim.points(), target);
            s.point = sim.points().points[s.target];
            run.samples[k].push_back(s);
        }
    }
    auto all_awake = [&] {
        for (const auto& ray : run.samples)
            for (const auto& s : ray)
                if (!sim.point_awake(s.target)) return false;
        return true;
    };
    while (!all_awake() && sim.clock() < t_cap) sim.advance(std::min(t_cap, sim.clock() + check_dt));
    for (auto& ray : run.samples)
        for (auto& s : ray) {
            s.awake = sim.point_awake(s.target);
            if (s.awake) s.T = sim.point_wake_time(s.target);
            if (!s.awake) run.partial = true;
        }
    run.exited_box = sim.exited_box();
    run.t_final = sim.clock();
    return run;
}

PassageRun passage_times_along_ray(const SimParams& params, const std::vector<Point>& rays,
                                   int n_max, double t_cap, double check_dt) {
    Simulation sim(params);
    return passage_times_along_ray(sim, rays, n_max, t_cap, check_dt);
}

FrontSeries front_series(Simulation& sim, double t_end, double sample_dt) {
    if (!(sample_dt > 0.0)) throw PreconditionError("sample_dt must be > 0");
    FrontSeries fs;
    const double t0 = sim.clock();
    for (long k = 1;; ++k) {
        const double t = t0 + static_cast<double>(k) * sample_dt;
        if (t > t_end + 1e-9 * sample_dt) break;
        sim.advance(t);
        fs.samples.emplace_back(t, sim.front());
    }
    fs.exited_box = sim.exited_box();
    return fs;
}

FrontSeries front_series(const SimParams& params, double t_end, double sample_dt) {
    Simulation sim(params);
    return front_series(sim, t_end, sample_dt);
}

double full_wake_time(const SimParams& params, double half, double t_cap) {
    Simulation sim(params);
    std::vector<std::uint32_t> inside;
    for (std::uint32_t i = 0; i < sim.points().size(); ++i) {
        const auto& p = sim.points().points[i];
        bool in = true;
        for (int k = 0; k < params.dim; ++k) in = in && std::abs(p[k]) <= half;
        if (in) inside.push_back(i);
    }
    double latest = 0.0;
    std::size_t next = 0;
    while (sim.clock() < t_cap) {
        sim.advance(std::min(t_cap, sim.clock() + 0.25));
        while (next < inside.size() && sim.point_awake(inside[next])) ++next;
        if (next == inside.size()) {
            for (auto i : inside) latest = std::max(latest, sim.point_wake_time(i));
            return latest;
        }
    }
    return std::numeric_limits<double>::infinity();
}

}  // namespace bfrog
