#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

#include "bfrog/branching.hpp"
#include "bfrog/csv.hpp"
#include "bfrog/errors.hpp"
#include "bfrog/experiments.hpp"
#include "bfrog/frogsim.hpp"
#include "bfrog/parallel.hpp"
#include "bfrog/percolation.hpp"
#include "bfrog/stats.hpp"
#include "bfrog/surgery.hpp"

namespace bfrog::exp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kZ95 = 1.959963984540054;

Verdict make_verdict(std::string name, double value, double lo, double hi, std::string target,
                     std::uint64_t n, bool pass) {
    return {std::move(name), value, lo, hi, std::move(target), n, pass};
}

std::string num(double v) { return format_double(v); }

struct MeanCi {
    double mean = kNaN, lo = kNaN, hi = kNaN, se = kNaN;
    std::size_t n = 0;
};

MeanCi mean_ci(const std::vector<double>& v) {
    MeanCi m;
    m.n = v.size();
    if (v.empty()) return m;
    m.mean = mean(v);
    if (v.size() < 2) return m;
    m.se = std::sqrt(variance(v) / static_cast<double>(v.size()));
    const double tq = t_quantile(0.975, static_cast<double>(v.size() - 1));
    m.lo = m.mean - tq * m.se;
    m.hi = m.mean + tq * m.se;
    return m;
}

std::vector<double> finite_only(const std::vector<double>& v) {
    std::vector<double> out;
    for (double x : v)
        if (std::isfinite(x)) out.push_back(x);
    return out;
}

SimParams sim_params(const ExperimentConfig& cfg, double r, std::uint64_t seed) {
    SimParams p;
    p.dim = cfg.dim;
    p.box_side = cfg.box_side;
    p.r = r;
    p.policy.dt_max = cfg.dt_max;
    p.policy.dt_min = std::min(p.policy.dt_min, cfg.dt_max);
    p.seed = seed;
    return p;
}

/// Unit directions used for passage times: +e1, +e2 (or -e1 in d = 1).
std::vector<Point> passage_rays(int dim) {
    if (dim == 1) return {Point{1.0, 0.0, 0.0}, Point{-1.0, 0.0, 0.0}};
    return {Point{1.0, 0.0, 0.0}, Point{0.0, 1.0, 0.0}};
}

std::string ray_name(int dim, std::size_t k) {
    if (dim == 1) return k == 0 ? "+e1" : "-e1";
    return k == 0 ? "e1" : "e2";
}

// ---------------------------------------------------------------------------
// Front replicas (shared by shape and critical-front)

struct FrontReplica {
    std::vector<std::pair<double, double>> front;  // (t, R_t)
    double t_final = 0.0;
    double out_radius = 0.0;
    double in_radius = 0.0;
    bool capped = false;  // stopped because R_t reached the cap
    bool exited = false;
    std::vector<std::vector<PassageSample>> passage;  // per ray, n = 0..n_max
    std::vector<WakeEvent> events;
};

FrontReplica run_front_replica(const SimParams& p, double t_max, double sample_dt, double cap,
                               int n_max, bool keep_events) {
    Simulation sim(p);
    FrontReplica out;
    const auto rays = passage_rays(p.dim);
    out.passage.resize(rays.size());
    for (std::size_t k = 0; k < rays.size(); ++k)
        for (int n = 0; n <= n_max; ++n) {
            Point target{};
            for (int a = 0; a < p.dim; ++a) target[a] = n * rays[k][a];
            PassageSample s;
            s.n = n;
            s.target = nearest_point(sim.points(), target);
            s.point = sim.points()[s.target];
            out.passage[k].push_back(s);
        }
    const double cap_at = cap * 0.5 * p.box_side;
    for (long k = 1;; ++k) {
        const double t = static_cast<double>(k) * sample_dt;
        if (t > t_max * (1.0 + 1e-12)) break;
        auto log = sim.advance(t);
        if (keep_events) out.events.insert(out.events.end(), log.begin(), log.end());
        out.front.emplace_back(t, sim.front());
        if (sim.front() >= cap_at) {
            out.capped = true;
            break;
        }
    }
    out.t_final = sim.clock();
    out.out_radius = sim.out_radius();
    out.in_radius = sim.in_radius();
    out.exited = sim.exited_box();
    for (auto& ray : out.passage)
        for (auto& s : ray) {
            s.awake = sim.point_awake(s.target);
            s.T = s.awake ? sim.point_wake_time(s.target) : kNaN;
        }
    return out;
}

// Replicas are pure functions of their parameters; shape and critical-front
// runs in one process share identical ones.
FrontReplica front_replica_cached(const SimParams& p, double t_max, double sample_dt, double cap,
                                  int n_max, bool keep_events) {
    if (keep_events) return run_front_replica(p, t_max, sample_dt, cap, n_max, true);
    static std::mutex mu;
    static std::map<std::string, FrontReplica> cache;
    std::ostringstream key;
    key << p.dim << ' ' << format_double(p.box_side) << ' ' << format_double(p.r) << ' '
        << format_double(p.policy.dt_max) << ' ' << format_double(p.policy.dt_min) << ' '
        << format_double(p.policy.safety) << ' ' << p.policy.bridge_correction << ' ' << p.seed
        << ' ' << format_double(t_max) << ' ' << format_double(sample_dt) << ' '
        << format_double(cap) << ' ' << n_max;
    {
        std::lock_guard lock(mu);
        if (auto it = cache.find(key.str()); it != cache.end()) return it->second;
    }
    auto rep = run_front_replica(p, t_max, sample_dt, cap, n_max, false);
    std::lock_guard lock(mu);
    cache.emplace(key.str(), rep);
    return rep;
}

double front_alpha(const FrontReplica& rep, double* r2 = nullptr) {
    FrontSeries fs;
    fs.samples = rep.front;
    try {
        const auto fit = growth_exponent_fit(fs);
        if (r2) *r2 = fit.r2;
        return fit.alpha;
    } catch (const std::exception&) {
        if (r2) *r2 = kNaN;
        return kNaN;
    }
}

CsvTable front_table(const std::vector<FrontReplica>& reps) {
    CsvTable t({"replica", "t", "R_t"});
    for (std::size_t i = 0; i < reps.size(); ++i)
        for (const auto& [time, R] : reps[i].front) t.row() << i << time << R;
    return t;
}

CsvTable passage_table(int dim, const std::vector<std::vector<std::vector<PassageSample>>>& reps) {
    CsvTable t({"replica", "ray", "n", "target", "x", "y", "T", "awake"});
    for (std::size_t i = 0; i < reps.size(); ++i)
        for (std::size_t k = 0; k < reps[i].size(); ++k)
            for (const auto& s : reps[i][k])
                t.row() << i << ray_name(dim, k) << s.n << s.target << s.point[0] << s.point[1]
                        << (s.awake ? s.T : kNaN) << s.awake;
    return t;
}

/// Verdicts on passage times: pooled T/n spread over [n_min, n_max] and the
/// per-ray time constants.
void passage_verdicts(const ExperimentConfig& cfg, double r,
                      const std::vector<std::vector<std::vector<PassageSample>>>& reps, int n_min,
                      ExperimentResult& res) {
    const std::size_t R = reps.size();
    // Flatness of the replica-averaged ratio curve n -> E[T_n] / n.
    auto spread = [&](std::size_t skip) {
        std::map<int, std::vector<double>> by_n;
        for (std::size_t i = 0; i < R; ++i) {
            if (i == skip) continue;
            for (const auto& ray : reps[i])
                for (const auto& s : ray)
                    if (s.n >= n_min && s.awake) by_n[s.n].push_back(s.T / s.n);
        }
        std::vector<double> curve;
        std::size_t count = 0;
        for (const auto& [n, v] : by_n) {
            curve.push_back(mean(v));
            count += v.size();
        }
        if (curve.size() < 2) return std::make_pair(kNaN, count);
        return std::make_pair(std::sqrt(variance(curve)) / mean(curve), count);
    };
    const auto [cv, count] = spread(R);
    std::vector<double> jack;
    for (std::size_t i = 0; i < R; ++i) jack.push_back(spread(i).first);
    double jse = kNaN;
    if (R >= 2) {
        const double jm = mean(jack);
        double ss = 0.0;
        for (double v : jack) ss += (v - jm) * (v - jm);
        jse = std::sqrt((static_cast<double>(R) - 1.0) / static_cast<double>(R) * ss);
    }
    res.verdicts.push_back(make_verdict("passage_ratio_spread", cv, cv - kZ95 * jse,
                                        cv + kZ95 * jse,
                                        "SD/mean over n in [" + std::to_string(n_min) +
                                            ", n_max] of mean T/n < 0.15",
                                        count, std::isfinite(cv) && cv < 0.15));
    {
        std::vector<double> pooled;
        for (const auto& rep : reps)
            for (const auto& ray : rep)
                for (const auto& s : ray)
                    if (s.n >= n_min && s.awake) pooled.push_back(s.T / s.n);
        res.details["pooled_ratio_cv"] =
            pooled.size() >= 2 ? Json(std::sqrt(variance(pooled)) / mean(pooled)) : Json(nullptr);
    }

    std::vector<SpeedEstimate> est;
    for (std::size_t k = 0; k < passage_rays(cfg.dim).size(); ++k) {
        std::vector<std::vector<PassageSample>> per;
        for (const auto& rep : reps) per.push_back(rep[k]);
        SpeedEstimate e;
        e.gamma_tilde = kNaN;
        try {
            e = estimate_speed(per, r, true);
        } catch (const std::exception&) {
            e.partial = true;
        }
        est.push_back(e);
        res.verdicts.push_back(make_verdict(
            "gamma_tilde_" + ray_name(cfg.dim, k), e.gamma_tilde, e.ci_lo, e.ci_hi,
            "finite, > 0, all targets awake", R,
            std::isfinite(e.gamma_tilde) && e.gamma_tilde > 0.0 && !e.partial));
    }
    const double diff = std::abs(est[0].gamma_tilde - est[1].gamma_tilde);
    const double joint = kZ95 * std::sqrt(est[0].se * est[0].se + est[1].se * est[1].se);
    res.verdicts.push_back(make_verdict("rays_agree", diff, 0.0, joint,
                                        "|difference| within joint 95% CI", R,
                                        std::isfinite(diff) && diff <= joint));
    const double gt = 0.5 * (est[0].gamma_tilde + est[1].gamma_tilde);
    const double se = 0.5 * std::sqrt(est[0].se * est[0].se + est[1].se * est[1].se);
    res.details["gamma_tilde"] = std::isfinite(gt) ? Json(gt) : Json(nullptr);
    res.details["gamma"] = gt > 0.0 ? Json(1.0 / gt) : Json(nullptr);
    res.details["radius"] = r;
    res.verdicts.push_back(make_verdict("gamma", gt > 0.0 ? 1.0 / gt : kNaN,
                                        gt + kZ95 * se > 0.0 ? 1.0 / (gt + kZ95 * se) : kNaN,
                                        gt - kZ95 * se > 0.0 ? 1.0 / (gt - kZ95 * se) : kNaN,
                                        "finite speed from both rays", R,
                                        std::isfinite(gt) && gt > 0.0));
}

// ---------------------------------------------------------------------------

ExperimentResult run_speed(const ExperimentConfig& cfg) {
    const double r = resolve_radius(cfg);
    const int n_max = static_cast<int>(cfg.param_u("n_max"));
    const int n_min = static_cast<int>(cfg.param_u("n_min"));
    const double check_dt = cfg.param("check_dt");
    if (n_max < 2 || n_min < 1 || n_min > n_max) throw ConfigError("need 1 <= n_min <= n_max");
    if (cfg.replicas < 2) throw ConfigError("speed needs at least 2 replicas");
    const auto rays = passage_rays(cfg.dim);
    std::vector<PassageRun> runs(cfg.replicas);
    parallel_for(cfg.replicas, cfg.workers, [&](std::uint64_t i) {
        runs[i] = passage_times_along_ray(sim_params(cfg, r, derive_seed(cfg.seed, i)), rays, n_max,
                                          cfg.t_max, check_dt);
    });
    std::vector<std::vector<std::vector<PassageSample>>> reps;
    std::uint64_t partial = 0, warn = 0;
    for (const auto& run : runs) {
        reps.push_back(run.samples);
        partial += run.partial;
        warn += run.boundary_warning;
    }
    ExperimentResult res;
    res.artifacts.push_back({"passage.csv", passage_table(cfg.dim, reps).str()});
    passage_verdicts(cfg, r, reps, n_min, res);
    res.details["partial_replicas"] = partial;
    res.details["boundary_warnings"] = warn;
    return res;
}

ExperimentResult run_shape(const ExperimentConfig& cfg) {
    const double r = resolve_radius(cfg);
    const int n_max = static_cast<int>(cfg.param_u("n_max"));
    const double sample_dt = cfg.param("sample_dt");
    const double cap = cfg.param("front_cap");
    const auto events_reps = cfg.param_u("events_replicas");
    if (cfg.replicas < 2) throw ConfigError("shape needs at least 2 replicas");
    if (!(cap > 0.0 && cap <= 1.0)) throw ConfigError("front_cap must lie in (0, 1]");
    std::vector<FrontReplica> reps(cfg.replicas);
    parallel_for(cfg.replicas, cfg.workers, [&](std::uint64_t i) {
        reps[i] = front_replica_cached(sim_params(cfg, r, derive_seed(cfg.seed, i)), cfg.t_max,
                                       sample_dt, cap, n_max, i < events_reps);
    });

    ExperimentResult res;
    res.artifacts.push_back({"front.csv", front_table(reps).str()});
    CsvTable shape({"replica", "t_final", "out_radius", "in_radius", "ratio", "alpha", "alpha_r2",
                    "capped", "exited_box"});
    std::vector<double> ratios, alphas;
    std::vector<std::vector<std::vector<PassageSample>>> passage;
    for (std::size_t i = 0; i < reps.size(); ++i) {
        double r2 = 0.0;
        const double a = front_alpha(reps[i], &r2);
        const double ratio = reps[i].in_radius > 0.0 ? reps[i].out_radius / reps[i].in_radius : kNaN;
        ratios.push_back(ratio);
        alphas.push_back(a);
        passage.push_back(reps[i].passage);
        shape.row() << i << reps[i].t_final << reps[i].out_radius << reps[i].in_radius << ratio << a
                    << r2 << reps[i].capped << reps[i].exited;
    }
    res.artifacts.push_back({"shape.csv", shape.str()});
    for (std::uint64_t i = 0; i < std::min<std::uint64_t>(events_reps, reps.size()); ++i) {
        CsvTable ev({"time", "frog_id", "cluster_id", "cluster_size"});
        for (const auto& e : reps[i].events) ev.row() << e.time << e.frog_id << e.cluster_id << e.cluster_size;
        res.artifacts.push_back({"events_" + std::to_string(i) + ".csv", ev.str()});
    }
    res.artifacts.push_back({"passage.csv", passage_table(cfg.dim, passage).str()});

    const auto rc = mean_ci(finite_only(ratios));
    res.verdicts.push_back(make_verdict("out_in_ratio", rc.mean, rc.lo, rc.hi,
                                        "mean out/in radius at final time in [1, 1.25]", rc.n,
                                        rc.mean >= 1.0 && rc.mean <= 1.25));
    const auto ac = mean_ci(finite_only(alphas));
    res.verdicts.push_back(make_verdict("front_exponent", ac.mean, ac.lo, ac.hi,
                                        "mean log-log front slope in [0.8, 1.2]", ac.n,
                                        ac.mean >= 0.8 && ac.mean <= 1.2));

    // Radii against gamma_hat * t with gamma_hat from the same runs.
    std::vector<std::vector<PassageSample>> pooled;
    for (const auto& rep : reps)
        for (const auto& ray : rep.passage) pooled.push_back(ray);
    double gamma = kNaN;
    try {
        gamma = estimate_speed(pooled, r, true).gamma;
    } catch (const std::exception&) {
    }
    std::vector<double> out_rel, in_rel;
    for (const auto& rep : reps) {
        out_rel.push_back(rep.out_radius / (gamma * rep.t_final));
        in_rel.push_back(rep.in_radius / (gamma * rep.t_final));
    }
    const auto oc = mean_ci(finite_only(out_rel));
    const auto ic = mean_ci(finite_only(in_rel));
    res.verdicts.push_back(make_verdict("out_radius_over_gamma_t", oc.mean, oc.lo, oc.hi,
                                        "within 20% of 1", oc.n, std::abs(oc.mean - 1.0) <= 0.2));
    res.verdicts.push_back(make_verdict("in_radius_over_gamma_t", ic.mean, ic.lo, ic.hi,
                                        "within 20% of 1", ic.n, std::abs(ic.mean - 1.0) <= 0.2));
    res.details["radius"] = r;
    res.details["gamma_hat"] = std::isfinite(gamma) ? Json(gamma) : Json(nullptr);
    res.details["alpha_fit_failures"] = alphas.size() - ac.n;
    return res;
}

ExperimentResult run_critical_front(const ExperimentConfig& cfg) {
    const double rc = resolve_radius(cfg);
    const double rs = rc * cfg.param("compare_scale");
    const double cap = cfg.param("front_cap");
    // Same passage targets as shape, so identical replicas are shared.
    const int n_max = static_cast<int>(cfg.param_u("n_max"));
    if (!(cap > 0.0 && cap <= 1.0)) throw ConfigError("front_cap must lie in (0, 1]");
    struct Arm {
        std::string name;
        double r, sample_dt, t_max;
    };
    const Arm arms[2] = {{"critical", rc, cfg.param("critical_sample_dt"), cfg.param("critical_t_max")},
                         {"subcritical", rs, cfg.param("sample_dt"), cfg.t_max}};
    ExperimentResult res;
    CsvTable alpha_tab({"arm", "replica", "radius", "alpha", "r2", "t_end", "R_end", "capped"});
    for (const auto& arm : arms) {
        std::vector<FrontReplica> reps(cfg.replicas);
        parallel_for(cfg.replicas, cfg.workers, [&](std::uint64_t i) {
            reps[i] = front_replica_cached(sim_params(cfg, arm.r, derive_seed(cfg.seed, i)), arm.t_max,
                                           arm.sample_dt, cap, n_max, false);
        });
        std::vector<double> alphas, r2s;
        for (std::size_t i = 0; i < reps.size(); ++i) {
            double r2 = 0.0;
            const double a = front_alpha(reps[i], &r2);
            alphas.push_back(a);
            r2s.push_back(r2);
            const auto& last = reps[i].front.back();
            alpha_tab.row() << arm.name << i << arm.r << a << r2 << last.first << last.second
                            << reps[i].capped;
        }
        res.artifacts.push_back({"front_" + arm.name + ".csv", front_table(reps).str()});
        const auto ac = mean_ci(finite_only(alphas));
        const bool critical = arm.name == "critical";
        res.verdicts.push_back(make_verdict(
            "alpha_" + arm.name, ac.mean, ac.lo, ac.hi,
            critical ? "mean alpha > 1.2" : "mean alpha in [0.8, 1.2]", ac.n,
            critical ? ac.mean > 1.2 : ac.mean >= 0.8 && ac.mean <= 1.2));
        res.details["r2_" + arm.name] = finite_only(r2s).empty() ? Json(nullptr) : Json(mean(finite_only(r2s)));
        res.details["fit_failures_" + arm.name] = alphas.size() - ac.n;
        res.details["radius_" + arm.name] = arm.r;
    }
    res.artifacts.push_back({"alpha.csv", alpha_tab.str()});
    res.details["note"] =
        "finite-box surrogate for superlinear critical growth; not a test of the t^(2-eps) law";
    return res;
}

// ---------------------------------------------------------------------------

ExperimentResult run_poisson_test(const ExperimentConfig& cfg) {
    if (cfg.dim != 1) throw ConfigError("poisson-test is defined for dim 1");
    const double r = resolve_radius(cfg);
    const auto wl = cfg.params["windows"];
    if (!wl.is_array() || wl.empty()) throw ConfigError("windows must be a non-empty list");
    std::vector<Region> windows;
    double reach = 0.0;
    for (const auto& w : wl) {
        if (!w.is_array() || w.size() != 2 || !w[0].is_number() || !w[1].is_number() ||
            !(w[0].get<double>() < w[1].get<double>()))
            throw ConfigError("each window must be [a, b] with a < b");
        windows.push_back(Region::box(1, {w[0].get<double>(), 0, 0}, {w[1].get<double>(), 0, 0}));
        reach = std::max({reach, std::abs(w[0].get<double>()), std::abs(w[1].get<double>())});
    }
    const double need = cfg.param("front_factor") * reach;
    if (!(0.5 * cfg.box_side > need)) throw ConfigError("box too small for the windows");

    std::vector<WindowSample> live(cfg.replicas), frozen(cfg.replicas);
    parallel_for(cfg.replicas, cfg.workers, [&](std::uint64_t i) {
        Simulation sim(sim_params(cfg, r, derive_seed(cfg.seed, i)));
        sim.advance(cfg.t_max);
        const auto snap = sim.snapshot();
        double lo = 0.0, hi = 0.0;
        for (const auto& p : snap.activated_points) {
            lo = std::min(lo, p[0]);
            hi = std::max(hi, p[0]);
        }
        const bool valid = lo <= -need && hi >= need;
        live[i] = {snap.active_positions, valid};
        frozen[i].positions = snap.activated_points;
        frozen[i].positions.push_back(Point{});  // origin frog frozen at its start
        frozen[i].valid = valid;
    });

    PoissonTestOptions opt;
    opt.alpha = cfg.param("alpha");
    const auto rep = poisson_window_test(live, windows, opt);
    const auto ctl = poisson_window_test(frozen, windows, opt);

    ExperimentResult res;
    CsvTable counts({"replica", "valid", "window", "count", "frozen_count"});
    for (std::size_t i = 0; i < live.size(); ++i)
        for (std::size_t w = 0; w < windows.size(); ++w) {
            std::uint64_t c = 0, f = 0;
            for (const auto& p : live[i].positions) c += windows[w].contains(p);
            for (const auto& p : frozen[i].positions) f += windows[w].contains(p);
            counts.row() << i << live[i].valid << w << c << f;
        }
    res.artifacts.push_back({"counts.csv", counts.str()});

    const double n = static_cast<double>(rep.used);
    const double alpha_w = opt.alpha / static_cast<double>(windows.size());
    for (std::size_t w = 0; w < rep.windows.size(); ++w) {
        const auto& ws = rep.windows[w];
        const std::string tag = "_w" + std::to_string(w);
        const double se = std::sqrt(ws.variance / std::max(1.0, n));
        res.verdicts.push_back(make_verdict("mean" + tag, ws.mean, ws.mean - kZ95 * se,
                                            ws.mean + kZ95 * se,
                                            "within 10% of volume " + num(ws.volume), rep.used,
                                            std::abs(ws.mean - ws.volume) <= 0.1 * ws.volume));
        res.verdicts.push_back(make_verdict("dispersion" + tag, ws.dispersion, ws.dispersion_lo,
                                            ws.dispersion_hi, "in [0.8, 1.2]", rep.used,
                                            ws.dispersion >= 0.8 && ws.dispersion <= 1.2));
        res.verdicts.push_back(make_verdict("gof_p" + tag, ws.gof.p_value, ws.gof.statistic,
                                            ws.gof.dof, "p > " + num(alpha_w) + " (Bonferroni)",
                                            rep.used, ws.gof.p_value > alpha_w));
    }
    const double corr_se = n > 3 ? 1.0 / std::sqrt(n - 3.0) : kNaN;
    res.verdicts.push_back(make_verdict("max_abs_corr", rep.max_abs_corr,
                                        std::max(0.0, rep.max_abs_corr - kZ95 * corr_se),
                                        rep.max_abs_corr + kZ95 * corr_se, "< 0.05", rep.used,
                                        rep.max_abs_corr < 0.05));
    const auto min_valid = cfg.param_u("min_valid");
    res.verdicts.push_back(make_verdict("valid_replicas", n, rep.exclusion_rate, rep.exclusion_rate,
                                        ">= " + std::to_string(min_valid) +
                                            " replicas with the front past the windows",
                                        live.size(), rep.used >= min_valid));
    double worst_disp = 1.0;
    for (const auto& ws : ctl.windows)
        if (std::abs(ws.dispersion - 1.0) > std::abs(worst_disp - 1.0)) worst_disp = ws.dispersion;
    res.verdicts.push_back(make_verdict("frozen_control_rejected", worst_disp, kNaN, kNaN,
                                        "frozen-at-wake positions fail the test", ctl.used, !ctl.pass));
    res.details["exclusion_rate"] = rep.exclusion_rate;
    res.details["radius"] = r;
    return res;
}

// ---------------------------------------------------------------------------

ExperimentResult run_crossing(const ExperimentConfig& cfg) {
    const double rc = resolve_radius(cfg);
    const double rs = rc * cfg.param("sub_scale");
    const auto ns = cfg.param_list("n_values");
    const double aspect = cfg.param("aspect");
    const double floor = cfg.param("p_floor");
    if (ns.size() < 2) throw ConfigError("n_values needs at least two sizes");
    ExperimentResult res;
    CsvTable tab({"radius", "n", "mode", "estimator", "p", "ci_lo", "ci_hi", "trials"});

    for (std::size_t k = 0; k < ns.size(); ++k) {
        const auto e = estimate_crossing_prob(rc, ns[k], aspect, CrossingMode::any, cfg.replicas,
                                              derive_seed(cfg.seed, 1, k), cfg.workers);
        tab.row() << rc << ns[k] << "any" << "monte_carlo" << e.p << e.ci_lo << e.ci_hi << e.trials;
        res.verdicts.push_back(make_verdict("p_critical_n" + num(ns[k]), e.p, e.ci_lo, e.ci_hi,
                                            ">= " + num(floor) + " with CI above 0", e.trials,
                                            e.p >= floor && e.ci_lo > 0.0));
    }

    const double width = cfg.param("split_level_width");
    std::vector<double> logs;
    std::uint64_t runs = cfg.param_u("split_runs");
    for (std::size_t k = 0; k < ns.size(); ++k) {
        const int levels = std::max(1, static_cast<int>(std::lround(ns[k] / width)));
        const auto s = estimate_crossing_prob_splitting(rs, ns[k], aspect, levels,
                                                        cfg.param_u("split_effort"), runs,
                                                        derive_seed(cfg.seed, 2, k), cfg.workers);
        tab.row() << rs << ns[k] << "any" << "splitting" << s.p << s.ci_lo << s.ci_hi
                  << runs * s.effort;
        logs.push_back(s.log_p);
        res.verdicts.push_back(make_verdict("log_p_subcritical_n" + num(ns[k]), s.log_p,
                                            s.log_p - kZ95 * s.log_se, s.log_p + kZ95 * s.log_se,
                                            "finite", runs, std::isfinite(s.log_p)));
    }
    double worst = -std::numeric_limits<double>::infinity();
    bool decreasing = true;
    for (std::size_t k = 1; k < logs.size(); ++k) {
        const double d = logs[k] - logs[k - 1];
        worst = std::max(worst, d);
        decreasing = decreasing && std::isfinite(d) && d < 0.0;
    }
    res.verdicts.push_back(make_verdict("log_p_subcritical_decreasing", worst, kNaN, kNaN,
                                        "largest successive change < 0", logs.size(), decreasing));

    // Leftmost-point probabilities at criticality, reported without a verdict.
    Json left = Json::array();
    const auto lreps = cfg.param_u("leftmost_replicas");
    for (std::size_t k = 0; k < ns.size() && lreps > 0; ++k) {
        const auto q = estimate_crossing_prob(rc, ns[k], aspect, CrossingMode::leftmost_from_ball,
                                              lreps, derive_seed(cfg.seed, 3, k), cfg.workers);
        tab.row() << rc << ns[k] << "leftmost_from_ball" << "monte_carlo" << q.p << q.ci_lo
                  << q.ci_hi << q.trials;
        left.push_back({{"n", ns[k]}, {"q", q.p}, {"n_times_q", ns[k] * q.p}});
    }
    res.artifacts.push_back({"crossing.csv", tab.str()});
    res.details["leftmost"] = left;
    res.details["radius_critical"] = rc;
    res.details["radius_subcritical"] = rs;
    return res;
}

ExperimentResult run_cluster_tail(const ExperimentConfig& cfg) {
    const double r = resolve_radius(cfg);
    const double box = cfg.box_side > 0.0 ? cfg.box_side : 40.0 * r;
    const auto s = cluster_size_samples(cfg.dim, r, box, cfg.replicas, cfg.seed, cfg.workers);
    ExperimentResult res;
    std::map<std::uint64_t, std::uint64_t> hist;
    for (auto v : s.sizes) ++hist[v];
    CsvTable h({"size", "count"});
    for (const auto& [k, c] : hist) h.row() << k << c;
    res.artifacts.push_back({"cluster_sizes.csv", h.str()});
    CsvTable surv({"k", "survival"});
    {
        std::uint64_t above = s.sizes.size();
        for (const auto& [k, c] : hist) {
            above -= c;
            surv.row() << k << static_cast<double>(above) / static_cast<double>(s.sizes.size());
        }
    }
    res.artifacts.push_back({"survival.csv", surv.str()});

    TailFit fit;
    bool ok = true;
    try {
        fit = tail_exponent_fit(s.sizes);
    } catch (const std::exception& e) {
        ok = false;
        res.details["fit_error"] = e.what();
    }
    const double min_r2 = cfg.param("min_r2");
    res.verdicts.push_back(make_verdict("tail_r2", ok ? fit.r2 : kNaN, kNaN, kNaN,
                                        "> " + num(min_r2), s.sizes.size(), ok && fit.r2 > min_r2));
    res.verdicts.push_back(make_verdict("tail_rate", ok ? fit.c : kNaN, kNaN, kNaN, "> 0",
                                        s.sizes.size(), ok && fit.c > 0.0));
    const double rate = static_cast<double>(s.truncated) / static_cast<double>(s.attempted);
    const double max_t = cfg.param("max_truncation");
    res.verdicts.push_back(make_verdict("truncation_rate", rate, kNaN, kNaN, "<= " + num(max_t),
                                        s.attempted, rate <= max_t));
    res.details["radius"] = r;
    res.details["box_side"] = box;
    if (ok) res.details["fit_k_range"] = {fit.k_min, fit.k_max};
    return res;
}

// ---------------------------------------------------------------------------

ExperimentResult run_branching(const ExperimentConfig& cfg) {
    const double r = resolve_radius(cfg);
    BranchingParams bp;
    bp.dim = cfg.dim;
    bp.r = r;
    bp.gen_max = static_cast<int>(cfg.param_u("gen_max"));
    bp.env_side = cfg.param("env_side");
    bp.tau_cap = cfg.param("tau_cap");
    bp.policy.dt_max = cfg.dt_max;
    bp.policy.dt_min = std::min(bp.policy.dt_min, cfg.dt_max);
    bp.validate();
    if (cfg.replicas < 2) throw ConfigError("branching needs at least 2 replicas");

    std::vector<BranchingRecord> recs(cfg.replicas);
    parallel_for(cfg.replicas, cfg.workers, [&](std::uint64_t i) {
        BranchingParams p = bp;
        p.seed = derive_seed(cfg.seed, 1, i);
        recs[i] = simulate_branching(p);
    });

    // Independent offspring and tau references.
    const auto n_off = cfg.param_u("offspring_samples");
    const double obox = 40.0 * r;
    std::vector<OffspringSample> off(n_off);
    parallel_for(n_off, cfg.workers, [&](std::uint64_t i) {
        Rng rng(derive_seed(cfg.seed, 2, i));
        off[i] = sample_offspring(cfg.dim, r, obox, rng);
    });
    const auto n_tau = cfg.param_u("tau_reference");
    std::vector<double> tau_ref(n_tau);
    parallel_for(n_tau, cfg.workers, [&](std::uint64_t i) {
        Rng rng(derive_seed(cfg.seed, 3, i));
        tau_ref[i] = sample_tau(cfg.dim, r, bp.env_side, bp.tau_cap, bp.policy, rng).tau;
    });

    ExperimentResult res;
    std::vector<double> X;
    std::vector<std::uint64_t> Xi;
    std::uint64_t min_x = std::numeric_limits<std::uint64_t>::max(), off_trunc = 0;
    double worst_disp = 0.0;
    for (const auto& o : off) {
        if (o.truncated) {
            ++off_trunc;
            continue;
        }
        X.push_back(static_cast<double>(o.X));
        Xi.push_back(o.X);
        min_x = std::min(min_x, o.X);
        const Point& contact = o.positions.back();
        for (const auto& p : o.positions)
            worst_disp = std::max(worst_disp, dist(p, contact) / (2.0 * r * static_cast<double>(o.X)));
    }
    for (const auto& rec : recs)
        for (const auto& p : rec.particles)
            if (p.offspring > 0) min_x = std::min<std::uint64_t>(min_x, p.offspring);
    const auto mu = mean_ci(X);

    CsvTable gen({"replica", "generation", "count"});
    for (std::size_t i = 0; i < recs.size(); ++i)
        for (int g = 0; g <= bp.gen_max; ++g) gen.row() << i << g << recs[i].generation_size(g);
    res.artifacts.push_back({"generations.csv", gen.str()});
    CsvTable part({"replica", "id", "parent", "generation", "birth_time", "birth_norm"});
    for (std::uint64_t i = 0; i < std::min<std::uint64_t>(cfg.param_u("particle_csv_replicas"), recs.size()); ++i)
        for (const auto& p : recs[i].particles)
            part.row() << i << p.id << p.parent << p.generation << p.birth_time << norm(p.birth_pos);
    res.artifacts.push_back({"particles.csv", part.str()});

    // E|Z_n| against mu_hat^n; Bonferroni over generations 1..gen_max.
    const double z = normal_quantile(1.0 - 0.05 / (2.0 * std::max(1, bp.gen_max)));
    for (int n = 1; n <= bp.gen_max; ++n) {
        std::vector<double> zn;
        for (const auto& rec : recs) zn.push_back(static_cast<double>(rec.generation_size(n)));
        const auto zc = mean_ci(zn);
        const double target = std::pow(mu.mean, n);
        const double target_se = n * std::pow(mu.mean, n - 1) * mu.se;
        const double half = z * std::sqrt(zc.se * zc.se + target_se * target_se);
        res.verdicts.push_back(make_verdict("mean_generation_n" + std::to_string(n), zc.mean,
                                            zc.mean - z * zc.se, zc.mean + z * zc.se,
                                            "mu_hat^" + std::to_string(n) + " = " + num(target) +
                                                " within joint CI",
                                            zn.size(), std::abs(zc.mean - target) <= half));
    }

    // Inter-branch times along the first-child lineage of each record.
    std::vector<double> lineage;
    for (const auto& rec : recs) {
        std::size_t id = 0;
        for (;;) {
            const auto& p = rec.particles[id];
            if (std::isnan(p.tau)) break;
            lineage.push_back(p.tau);
            std::size_t child = 0;
            for (std::size_t j = id + 1; j < rec.particles.size(); ++j)
                if (rec.particles[j].parent == static_cast<std::int64_t>(p.id)) {
                    child = j;
                    break;
                }
            if (child == 0) break;
            id = child;
        }
    }
    const double alpha = cfg.param("alpha");
    const auto ks = ks_two_sample(lineage, tau_ref);
    res.verdicts.push_back(make_verdict("tau_lineage_ks_p", ks.p_value, ks.statistic, ks.statistic,
                                        "p > " + num(alpha), lineage.size(), ks.p_value > alpha));

    TailFit tf;
    bool ok = true;
    try {
        tf = tail_exponent_fit(Xi);
    } catch (const std::exception& e) {
        ok = false;
        res.details["tail_fit_error"] = e.what();
    }
    const double min_r2 = cfg.param("min_r2");
    res.verdicts.push_back(make_verdict("offspring_tail_r2", ok ? tf.r2 : kNaN, kNaN, kNaN,
                                        "> " + num(min_r2), Xi.size(), ok && tf.r2 > min_r2));
    res.verdicts.push_back(make_verdict("offspring_min_x", static_cast<double>(min_x), kNaN, kNaN,
                                        ">= 2", Xi.size(), min_x >= 2));
    res.verdicts.push_back(make_verdict("offspring_displacement", worst_disp, kNaN, kNaN,
                                        "max |offspring - contact| / (2 r X) <= 1", Xi.size(),
                                        worst_disp <= 1.0));

    // Generation statistics at times where every record is complete: no
    // particle of the last generation has been born yet.
    double t_complete = std::numeric_limits<double>::infinity();
    for (const auto& rec : recs)
        for (const auto& p : rec.particles)
            if (p.generation == bp.gen_max) t_complete = std::min(t_complete, p.birth_time);
    CsvTable gs_tab({"t", "replica", "N_t", "M_t"});
    Json gs_json = Json::array();
    if (std::isfinite(t_complete))
        for (double f : {0.25, 0.5, 1.0}) {
            const double t = f * t_complete;
            const auto gs = generation_stats(recs, t);
            for (std::size_t i = 0; i < recs.size(); ++i)
                gs_tab.row() << t << i << gs.max_generation[i] << gs.max_displacement[i];
            std::vector<double> nt(gs.max_generation.begin(), gs.max_generation.end());
            gs_json.push_back({{"t", t}, {"mean_N_t", mean(nt)}, {"mean_M_t", mean(gs.max_displacement)}});
        }
    res.artifacts.push_back({"generation_stats.csv", gs_tab.str()});

    std::uint64_t capped = 0, truncated = 0, otrunc = 0;
    for (const auto& rec : recs) {
        capped += rec.tau_capped;
        truncated += rec.truncated;
        otrunc += rec.offspring_truncated;
    }
    res.details["radius"] = r;
    res.details["mu_hat"] = mu.mean;
    res.details["mu_se"] = mu.se;
    res.details["tau_capped"] = capped;
    res.details["records_truncated"] = truncated;
    res.details["offspring_truncated_in_records"] = otrunc;
    res.details["offspring_reference_truncated"] = off_trunc;
    res.details["generation_stats"] = gs_json;
    res.details["complete_until"] = std::isfinite(t_complete) ? Json(t_complete) : Json(nullptr);
    return res;
}

// ---------------------------------------------------------------------------

ExperimentResult run_surgery(const ExperimentConfig& cfg) {
    if (cfg.dim != 2) throw ConfigError("surgery is run in dim 2");
    const double side = cfg.box_side;
    if (!(side >= 8.0)) throw ConfigError("surgery window side must be >= 8");
    const auto window = Region::centered_cube(2, side);
    const std::vector<Region> csr_windows = {
        Region::box(2, {-1.0, -1.0, 0.0}, {1.0, 1.0, 0.0}),
        Region::box(2, {1.0, -1.0, 0.0}, {3.0, 1.0, 0.0}),
        Region::box(2, {-3.0, -1.0, 0.0}, {-1.0, 1.0, 0.0}),
        Region::box(2, {-1.0, 1.0, 0.0}, {1.0, 3.0, 0.0}),
    };
    const double alpha = cfg.param("alpha");
    if (!cfg.params["families"].is_array() || cfg.params["families"].empty())
        throw ConfigError("families must be a non-empty list");

    ExperimentResult res;
    CsvTable report({"family", "sample", "test", "statistic", "p_value", "pass"});
    CsvTable taus({"family", "trial", "accepted", "tau"});
    std::uint64_t fam_index = 0;
    for (const auto& fj : cfg.params["families"]) {
        const auto fam = fj.get<std::string>();
        SurgeryOptions opt;
        if (fam == "balls")
            opt.growth = GrowthFamily::concentric_balls;
        else if (fam == "sausage")
            opt.growth = GrowthFamily::brownian_sausage;
        else
            throw ConfigError("unknown growth family '" + fam + "'");
        opt.sausage_r = cfg.param("sausage_r");
        opt.sausage_dt = cfg.param("sausage_dt");

        std::vector<SurgeryTrial> trials(cfg.replicas);
        std::vector<std::vector<Point>> cut_all(cfg.replicas);
        parallel_for(cfg.replicas, cfg.workers, [&](std::uint64_t i) {
            trials[i] = run_surgery_trial(window, opt, derive_seed(cfg.seed, fam_index, i));
            // Un-spliced control: the swept region is emptied and never refilled.
            if (trials[i].accepted) cut_all[i] = unspliced(trials[i]).points;
            trials[i].mu.points.clear();  // keep memory flat
            trials[i].nu.points.clear();
        });
        std::vector<double> tau;
        std::vector<std::vector<Point>> eta, cut;
        for (std::uint64_t i = 0; i < trials.size(); ++i) {
            const auto& t = trials[i];
            taus.row() << fam << i << t.accepted << t.tau;
            if (!t.accepted) continue;
            tau.push_back(t.tau);
            eta.push_back(t.eta.points);
            cut.push_back(std::move(cut_all[i]));
        }

        const auto ks = ks_one_sample(tau, [](double s) { return s <= 0.0 ? 0.0 : 1.0 - std::exp(-s); });
        res.verdicts.push_back(make_verdict("tau_exp_ks_p_" + fam, ks.p_value, ks.statistic,
                                            ks.statistic, "p > " + num(alpha), tau.size(),
                                            ks.p_value > alpha));
        CsrOptions copt;
        copt.alpha = alpha;
        copt.reference_seed = derive_seed(cfg.seed, 100 + fam_index);
        const auto csr = csr_test_suite(eta, csr_windows, copt);
        const auto ctl = csr_test_suite(cut, csr_windows, copt);
        double min_p = 1.0;
        for (const auto& row : csr.rows) {
            report.row() << fam << "eta" << row.name << row.statistic << row.p_value << row.pass;
            if (row.name.rfind("count_corr", 0) != 0) min_p = std::min(min_p, row.p_value);
        }
        for (const auto& row : ctl.rows)
            report.row() << fam << "unspliced" << row.name << row.statistic << row.p_value << row.pass;
        res.verdicts.push_back(make_verdict("csr_" + fam, min_p, kNaN, kNaN,
                                            "every CSR row passes (family-wise p " + num(alpha) + ")",
                                            eta.size(), csr.pass));
        res.verdicts.push_back(make_verdict("max_abs_corr_" + fam, csr.max_abs_corr, kNaN, kNaN,
                                            "< 0.05", eta.size(), csr.max_abs_corr < 0.05));
        res.verdicts.push_back(make_verdict("unspliced_rejected_" + fam, ctl.pass ? 0.0 : 1.0, kNaN,
                                            kNaN, "un-spliced control fails CSR", cut.size(),
                                            !ctl.pass));
        res.details["accepted_" + fam] = tau.size();
        res.details["acceptance_rate_" + fam] = static_cast<double>(tau.size()) / static_cast<double>(cfg.replicas);
        ++fam_index;
    }
    res.artifacts.push_back({"csr_report.csv", report.str()});
    res.artifacts.push_back({"tau.csv", taus.str()});
    return res;
}

ExperimentResult run_bm_bounds(const ExperimentConfig& cfg) {
    std::vector<int> ells;
    for (double e : cfg.param_list("ells")) {
        if (e < 1.0 || e != std::floor(e)) throw ConfigError("ells must be positive integers");
        ells.push_back(static_cast<int>(e));
    }
    const auto checks = verify_bm_bounds(cfg.param("k"), ells, cfg.replicas, cfg.seed,
                                         static_cast<int>(cfg.param_u("steps_per_k2")), cfg.workers);
    ExperimentResult res;
    CsvTable tab({"name", "ell", "empirical", "sigma", "bound", "replicas", "pass"});
    for (const auto& c : checks)
        tab.row() << c.name << c.ell << c.empirical << c.sigma << c.bound << c.replicas << c.pass;
    res.artifacts.push_back({"bm_bounds.csv", tab.str()});
    for (int ell : ells) {
        const BoundCheck* within = nullptr;
        const BoundCheck* exceeds = nullptr;
        for (const auto& c : checks)
            if (c.ell == ell) (c.name.rfind("max_abs", 0) == 0 ? within : exceeds) = &c;
        std::ostringstream target;
        target << "P[max|B| <= k] <= " << num(within->bound) << " + 3 sigma and P[max B >= l k] <= "
               << num(exceeds->bound) << " + 3 sigma";
        res.verdicts.push_back(make_verdict("bm_bounds_ell" + std::to_string(ell), within->empirical,
                                            within->empirical - 3.0 * within->sigma,
                                            within->empirical + 3.0 * within->sigma, target.str(),
                                            within->replicas, within->pass && exceeds->pass));
    }
    return res;
}

ExperimentResult run_critical_radius(const ExperimentConfig& cfg) {
    if (cfg.dim != 2) throw ConfigError("critical-radius is defined for dim 2");
    const double n = cfg.param("n"), cmp_n = cfg.param("compare_n"), tol = cfg.param("tol");
    const double r_lo = cfg.param("r_lo"), r_hi = cfg.param("r_hi");
    const auto seeds = cfg.param_u("seeds");
    ExperimentResult res;
    CsvTable trace({"run", "n", "r", "p_hat"});
    std::vector<double> est;
    bool converged = true;
    Json runs = Json::array();
    auto one = [&](const std::string& name, double size, std::uint64_t s) {
        try {
            const auto c = estimate_critical_radius(size, cfg.replicas, tol, s, r_lo, r_hi, 40,
                                                    cfg.workers);
            for (const auto& [r, p] : c.trace) trace.row() << name << size << r << p;
            runs.push_back({{"run", name}, {"n", size}, {"r_hat", c.r_hat}, {"iterations", c.iterations}});
            return c.r_hat;
        } catch (const ComputationError& e) {
            converged = false;
            runs.push_back({{"run", name}, {"n", size}, {"error", e.what()}});
            return kNaN;
        }
    };
    for (std::uint64_t k = 0; k < seeds; ++k)
        est.push_back(one("seed" + std::to_string(k), n, derive_seed(cfg.seed, k)));
    const double cmp = one("compare", cmp_n, derive_seed(cfg.seed, 0));
    res.artifacts.push_back({"critical_trace.csv", trace.str()});

    const double r_hat = converged ? mean(est) : kNaN;
    const auto [mn, mx] = std::minmax_element(est.begin(), est.end());
    const double spread = converged ? *mx - *mn : kNaN;
    const double shift = converged ? std::abs(r_hat - cmp) : kNaN;
    res.verdicts.push_back(make_verdict("converged", converged ? 1.0 : 0.0, kNaN, kNaN,
                                        "bisection converged for every run", runs.size(), converged));
    const double spread_tol = cfg.param("seed_spread_tol"), shift_tol = cfg.param("window_shift_tol");
    res.verdicts.push_back(make_verdict("seed_spread", spread, converged ? *mn : kNaN,
                                        converged ? *mx : kNaN, "<= " + num(spread_tol), seeds,
                                        converged && spread <= spread_tol));
    res.verdicts.push_back(make_verdict("window_shift", shift, cmp, r_hat,
                                        "|r_hat(n) - r_hat(compare_n)| <= " + num(shift_tol), 2,
                                        converged && shift <= shift_tol));
    Json art = {{"r_hat", converged ? Json(r_hat) : Json(nullptr)},
                {"n", n},
                {"tol", tol},
                {"replicas", cfg.replicas},
                {"estimates", runs}};
    res.artifacts.push_back({"critical_radius.json", art.dump(2) + "\n"});
    res.details["r_hat"] = art["r_hat"];
    res.details["runs"] = runs;
    return res;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    const auto& e = cfg.experiment;
    const bool needs_box = e == "speed" || e == "shape" || e == "critical-front" ||
                           e == "poisson-test" || e == "surgery";
    if (needs_box && !(cfg.box_side > 0.0)) throw ConfigError("box_side must be positive");
    if (e == "speed") return run_speed(cfg);
    if (e == "shape") return run_shape(cfg);
    if (e == "critical-front") return run_critical_front(cfg);
    if (e == "poisson-test") return run_poisson_test(cfg);
    if (e == "crossing") return run_crossing(cfg);
    if (e == "cluster-tail") return run_cluster_tail(cfg);
    if (e == "branching") return run_branching(cfg);
    if (e == "surgery") return run_surgery(cfg);
    if (e == "bm-bounds") return run_bm_bounds(cfg);
    if (e == "critical-radius") return run_critical_radius(cfg);
    throw ConfigError("unknown experiment '" + e + "'");
}

}  // namespace bfrog::exp
