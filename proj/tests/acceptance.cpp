// Acceptance suite: one PASS/FAIL line per criterion on stdout, details in
// <out>/acceptance_details.txt and <out>/acceptance.json.
//
// usage: bfrog_acceptance [out_dir] [--only 1,2,...]

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <sys/wait.h>

#include "bfrog/csv.hpp"
#include "bfrog/experiments.hpp"
#include "bfrog/motion.hpp"
#include "bfrog/percolation.hpp"
#include "bfrog/stats.hpp"
#include "oracles.hpp"

using namespace bfrog;
using bfrog::exp::Json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string summary;
};

struct Criterion {
    int id;
    std::string name;
    double budget_s;
    std::function<Outcome()> run;
};

fs::path g_root;
std::ofstream g_log;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

fs::path critical_json() { return g_root / "critical-radius" / "critical_radius.json"; }

/// Runs an experiment in-process into <root>/<dir>. Returns the summary
/// (null when the run failed before writing one).
Json run_experiment_dir(Json cfg, const std::string& dir) {
    cfg["out_dir"] = (g_root / dir).string();
    if (!cfg.contains("critical_artifact")) cfg["critical_artifact"] = critical_json().string();
    std::ostringstream log;
    int code = 2;
    try {
        code = exp::run_to_dir(exp::parse_config(cfg), log);
    } catch (const std::exception& e) {
        log << "config error: " << e.what() << '\n';
    }
    g_log << "--- " << cfg["experiment"].get<std::string>() << " (exit " << code << ")\n"
          << log.str();
    g_log.flush();
    const auto path = g_root / dir / "summary.json";
    if (code == 2 || !fs::exists(path)) return nullptr;
    return Json::parse(slurp(path));
}

const Json* verdict(const Json& summary, const std::string& name) {
    if (summary.is_null()) return nullptr;
    for (const auto& v : summary["verdicts"])
        if (v["name"] == name) return &v;
    return nullptr;
}

bool passed(const Json& summary, const std::string& name) {
    const auto* v = verdict(summary, name);
    return v && (*v)["pass"].get<bool>();
}

std::string value(const Json& summary, const std::string& name) {
    const auto* v = verdict(summary, name);
    if (!v || !(*v)["value"].is_number()) return "n/a";
    return fmt((*v)["value"].get<double>());
}

/// Names of failed verdicts among `names` (all verdicts when empty).
std::string failed_list(const Json& summary, const std::vector<std::string>& names = {}) {
    if (summary.is_null()) return "run failed";
    std::string out;
    for (const auto& v : summary["verdicts"]) {
        const auto n = v["name"].get<std::string>();
        if (!names.empty() && std::find(names.begin(), names.end(), n) == names.end()) continue;
        if (!v["pass"].get<bool>()) out += (out.empty() ? "" : ",") + n;
    }
    return out;
}

Outcome from_summary(const Json& summary, std::string info) {
    if (summary.is_null()) return {false, "run failed: see acceptance_details.txt"};
    const bool ok = summary["all_pass"].get<bool>();
    if (!ok) info += "; failed: " + failed_list(summary);
    return {ok, info};
}

// ---------------------------------------------------------------------------

Outcome poisson_sampler_and_grid() {
    const auto region = Region::centered_cube(2, 4.0).exclude({Point{}, 0.5});
    std::vector<std::uint64_t> counts;
    for (std::uint64_t i = 0; i < 10000; ++i) {
        Rng rng(derive_seed(101, i));
        counts.push_back(sample_ppp(region, 1.0, rng).points.size());
    }
    const auto gof = poisson_gof(counts, region.volume());

    Rng rng(102);
    const auto ps = sample_ppp(Region::centered_cube(2, 30.0), 1.0, rng);
    const SpatialGrid grid(ps, 1.0);
    int mismatches = 0;
    for (int q = 0; q < 100; ++q) {
        const Point x{rng.uniform(-16, 16), rng.uniform(-16, 16), 0.0};
        const double rho = rng.uniform(0.2, 3.0);
        const auto a = grid.query_within(x, rho);
        const auto b = brute_force_within(ps.points, x, rho);
        bool same = a.size() == b.size();
        for (std::size_t k = 0; same && k < a.size(); ++k) same = a[k].index == b[k].index;
        mismatches += !same;
    }
    return {gof.p_value > 0.01 && mismatches == 0,
            "count GOF p=" + fmt(gof.p_value) + " (1e4 replicas), grid mismatches " +
                std::to_string(mismatches) + "/100"};
}

Outcome percolation_oracles() {
    int bad_partition = 0, bad_crossing = 0, invalid_chain = 0, crossings = 0;
    for (std::uint64_t inst = 0; inst < 50; ++inst) {
        Rng rng(derive_seed(201, inst));
        const int dim = 1 + static_cast<int>(inst % 3);
        const double volume = rng.uniform(200.0, 2000.0);
        const double side = std::pow(volume, 1.0 / dim);
        auto ps = sample_ppp(Region::centered_cube(dim, side), 1.0, rng);
        if (ps.points.size() > 2000) ps.points.resize(2000);
        const double r = rng.uniform(0.5, 1.5);
        bad_partition += !oracle::same_partition(clusters(ps, r).label,
                                                 oracle::bfs_components(ps.points, r));
    }
    for (std::uint64_t inst = 0; inst < 50; ++inst) {
        Rng rng(derive_seed(202, inst));
        const double n = rng.uniform(3.0, 15.0);
        const double r = rng.uniform(0.9, 1.4);
        const auto ps = sample_ppp(Region::box(2, {0, 0, 0}, {n, 3.0 * n, 0}), 1.0, rng);
        const CrossingSpec spec{{0, 0, 0}, {n, 3.0 * n, 0}, r};
        const auto res = sponge_crossing_exists(ps, spec);
        bad_crossing += res.crosses != oracle::augmented_bfs_crossing(ps.points, 0.0, n, r);
        if (res.crosses) {
            ++crossings;
            invalid_chain += !is_valid_crossing(ps, spec, res.chain);
        }
    }
    return {bad_partition == 0 && bad_crossing == 0 && invalid_chain == 0,
            "partition mismatches " + std::to_string(bad_partition) +
                "/50, crossing mismatches " + std::to_string(bad_crossing) + "/50 (" +
                std::to_string(crossings) + " crossing), invalid witness chains " +
                std::to_string(invalid_chain)};
}

Outcome critical_radius() {
    const auto s = run_experiment_dir({{"experiment", "critical-radius"}}, "critical-radius");
    std::string info;
    if (!s.is_null())
        info = "r_hat=" + (s["details"]["r_hat"].is_number() ? fmt(s["details"]["r_hat"].get<double>())
                                                              : std::string("n/a")) +
               ", seed spread " + value(s, "seed_spread") + ", n=10 vs n=40 shift " +
               value(s, "window_shift");
    return from_summary(s, info);
}

Outcome sponge_crossings() {
    const auto s = run_experiment_dir({{"experiment", "crossing"}}, "crossing");
    std::string info;
    if (!s.is_null())
        info = "p(n,3n) at r_hat: " + value(s, "p_critical_n5") + ", " + value(s, "p_critical_n10") +
               ", " + value(s, "p_critical_n20") + "; log p at 0.6 r_hat: " +
               value(s, "log_p_subcritical_n5") + ", " + value(s, "log_p_subcritical_n10") + ", " +
               value(s, "log_p_subcritical_n20");
    return from_summary(s, info);
}

Outcome brownian_bounds() {
    const auto s = run_experiment_dir({{"experiment", "bm-bounds"}}, "bm-bounds");
    return from_summary(s, "1e5 replicas, l = 1, 2, 3");
}

Outcome hitting_engine() {
    auto cdf_grid = [](int dim, double gap, double t_max, StepPolicy pol, std::uint64_t seed,
                       std::uint64_t reps) {
        const std::vector<Point> center{Point{}};
        const SpatialGrid grid(dim, center, 1.0);
        const double r = dim == 1 ? 0.5 : 1.0;
        std::vector<double> times;
        for (std::uint64_t i = 0; i < reps; ++i) {
            Rng rng(derive_seed(seed, i));
            const auto h = simulate_until_hit(Point{r + gap, 0, 0}, grid, r, t_max, pol, rng);
            times.push_back(h.hit() ? h.time : std::numeric_limits<double>::infinity());
        }
        std::sort(times.begin(), times.end());
        return times;
    };
    auto ecdf = [](const std::vector<double>& s, double t) {
        return static_cast<double>(std::upper_bound(s.begin(), s.end(), t) - s.begin()) /
               static_cast<double>(s.size());
    };
    const std::uint64_t reps = 100000;
    StepPolicy coarse, fine;
    fine.dt_max = coarse.dt_max / 2.0;
    const auto a = cdf_grid(2, 1.0, 5.0, coarse, 601, reps);
    const auto b = cdf_grid(2, 1.0, 5.0, fine, 602, reps);
    const auto c = cdf_grid(1, 1.0, 5.0, coarse, 603, reps);
    double halving = 0.0, reflection = 0.0;
    for (int k = 1; k <= 500; ++k) {
        const double t = 0.01 * k;
        halving = std::max(halving, std::abs(ecdf(a, t) - ecdf(b, t)));
        reflection = std::max(reflection, std::abs(ecdf(c, t) - oracle::reflection_cdf(1.0, t)));
    }
    return {halving < 0.01 && reflection < 0.02,
            "d=2 dt halving sup|dF|=" + fmt(halving) + " (< 0.01), d=1 vs reflection sup|dF|=" +
                fmt(reflection) + " (< 0.02), 1e5 replicas each"};
}

Outcome speed_and_shape() {
    const auto sp = run_experiment_dir({{"experiment", "speed"}}, "speed");
    const auto sh = run_experiment_dir({{"experiment", "shape"}}, "shape");
    if (sp.is_null() || sh.is_null()) return {false, "run failed: see acceptance_details.txt"};
    const bool ok = passed(sp, "passage_ratio_spread") && passed(sp, "rays_agree") &&
                    passed(sh, "out_in_ratio") && passed(sh, "front_exponent");
    std::string info = "T/n spread " + value(sp, "passage_ratio_spread") + ", gamma " +
                       value(sp, "gamma") + ", rays diff " + value(sp, "rays_agree") +
                       ", out/in " + value(sh, "out_in_ratio") + ", front slope " +
                       value(sh, "front_exponent");
    const auto f1 = failed_list(sp, {"passage_ratio_spread", "rays_agree"});
    const auto f2 = failed_list(sh, {"out_in_ratio", "front_exponent"});
    if (!ok) info += "; failed: " + f1 + (f1.empty() || f2.empty() ? "" : ",") + f2;
    return {ok, info};
}

Outcome poisson_limit() {
    const auto s = run_experiment_dir({{"experiment", "poisson-test"}}, "poisson-test");
    std::string info;
    if (!s.is_null())
        info = "means " + value(s, "mean_w0") + "/" + value(s, "mean_w1") + "/" + value(s, "mean_w2") +
               " (volume 3), dispersion " + value(s, "dispersion_w0") + "/" +
               value(s, "dispersion_w1") + "/" + value(s, "dispersion_w2") + ", max |corr| " +
               value(s, "max_abs_corr") + ", valid " + value(s, "valid_replicas");
    return from_summary(s, info);
}

Outcome critical_front() {
    const auto s = run_experiment_dir({{"experiment", "critical-front"}}, "critical-front");
    std::string info;
    if (!s.is_null())
        info = "alpha at r_hat " + value(s, "alpha_critical") + " (> 1.2), at 0.7 r_hat " +
               value(s, "alpha_subcritical") + " (in [0.8, 1.2]); not a test of t^(2-eps)";
    return from_summary(s, info);
}

Outcome branching() {
    const auto s = run_experiment_dir({{"experiment", "branching"}}, "branching");
    const auto t = run_experiment_dir({{"experiment", "cluster-tail"}}, "cluster-tail");
    if (s.is_null() || t.is_null()) return {false, "run failed: see acceptance_details.txt"};
    const bool ok = s["all_pass"].get<bool>() && t["all_pass"].get<bool>();
    std::string info = "mu_hat " + fmt(s["details"]["mu_hat"].get<double>()) + ", E|Z_5| " +
                       value(s, "mean_generation_n5") + ", tau KS p " + value(s, "tau_lineage_ks_p") +
                       ", offspring tail R2 " + value(s, "offspring_tail_r2") + ", cluster tail R2 " +
                       value(t, "tail_r2") + ", min X " + value(s, "offspring_min_x");
    if (!ok) info += "; failed: " + failed_list(s) + " " + failed_list(t);
    return {ok, info};
}

Outcome surgery() {
    const auto s = run_experiment_dir({{"experiment", "surgery"}}, "surgery");
    std::string info;
    if (!s.is_null())
        info = "tau KS p " + value(s, "tau_exp_ks_p_balls") + "/" + value(s, "tau_exp_ks_p_sausage") +
               ", CSR min p " + value(s, "csr_balls") + "/" + value(s, "csr_sausage") +
               " (balls/sausage), controls rejected";
    return from_summary(s, info);
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FROGSIM_BIN) + " " + args + " >/dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

Json strip_volatile(Json summary) {
    summary.erase("wall_time_s");
    summary.erase("config_hash");
    summary["config"].erase("workers");
    summary["config"].erase("out_dir");
    return summary;
}

Outcome determinism() {
    // Small configurations of every experiment, each run in a fresh process
    // with 1 and 3 workers.
    const std::vector<Json> configs = {
        {{"experiment", "critical-radius"}, {"replicas", 100}, {"n", 10.0}, {"seeds", 2}},
        {{"experiment", "crossing"}, {"replicas", 200}, {"n_values", {5.0, 10.0}}, {"split_runs", 4},
         {"split_effort", 200}, {"leftmost_replicas", 100}},
        {{"experiment", "bm-bounds"}, {"replicas", 2000}},
        {{"experiment", "speed"}, {"replicas", 3}, {"box_side", 60.0}, {"n_min", 5}, {"n_max", 12},
         {"t_max", 5.0}},
        {{"experiment", "shape"}, {"replicas", 3}, {"box_side", 80.0}, {"t_max", 2.0}, {"n_max", 10}},
        {{"experiment", "critical-front"}, {"replicas", 3}, {"box_side", 80.0}, {"t_max", 2.0},
         {"critical_t_max", 0.5}},
        {{"experiment", "poisson-test"}, {"replicas", 200}, {"t_max", 20.0}, {"min_valid", 10}},
        {{"experiment", "cluster-tail"}, {"replicas", 10000}},
        {{"experiment", "branching"}, {"replicas", 6}, {"gen_max", 3}, {"offspring_samples", 10000},
         {"tau_reference", 200}},
        {{"experiment", "surgery"}, {"replicas", 10000}, {"families", {"balls"}}},
    };
    std::vector<std::string> differing;
    for (const auto& base : configs) {
        const auto name = base["experiment"].get<std::string>();
        std::vector<fs::path> dirs;
        for (int w : {1, 3}) {
            Json cfg = base;
            cfg["critical_artifact"] = critical_json().string();
            const auto dir = g_root / "determinism" / (name + "_w" + std::to_string(w));
            fs::remove_all(dir);
            fs::create_directories(dir);
            std::ofstream(dir / "config.json") << cfg.dump(2);
            const int code = run_cli(name + " --config " + (dir / "config.json").string() +
                                     " --workers " + std::to_string(w) + " --out " + dir.string());
            g_log << "--- determinism " << name << " workers " << w << " exit " << code << '\n';
            dirs.push_back(dir);
        }
        bool same = fs::exists(dirs[0] / "summary.json") && fs::exists(dirs[1] / "summary.json");
        std::size_t files = 0;
        for (const auto& entry : fs::directory_iterator(dirs[0])) {
            const auto fname = entry.path().filename().string();
            if (fname == "config.json") continue;
            ++files;
            if (fname == "summary.json") {
                same = same && strip_volatile(Json::parse(slurp(entry.path()))) ==
                                   strip_volatile(Json::parse(slurp(dirs[1] / fname)));
            } else {
                same = same && fs::exists(dirs[1] / fname) && slurp(entry.path()) == slurp(dirs[1] / fname);
            }
        }
        g_log << "    " << files << " files compared: " << (same ? "identical" : "DIFFERENT") << '\n';
        if (!same) differing.push_back(name);
    }
    std::string info = std::to_string(configs.size()) + " experiments, workers 1 vs 3, fresh processes";
    if (!differing.empty()) {
        info += "; differing:";
        for (const auto& d : differing) info += " " + d;
    }
    return {differing.empty(), info};
}

}  // namespace

int main(int argc, char** argv) {
    g_root = "acceptance_out";
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
        } else {
            g_root = a;
        }
    }
    fs::create_directories(g_root);
    g_log.open(g_root / "acceptance_details.txt");

    const std::vector<Criterion> criteria = {
        {1, "poisson-sampler-and-grid", 60, poisson_sampler_and_grid},
        {2, "percolation-oracles", 60, percolation_oracles},
        {3, "critical-radius", 600, critical_radius},
        {4, "sponge-crossings", 600, sponge_crossings},
        {5, "brownian-bounds", 120, brownian_bounds},
        {6, "hitting-engine", 300, hitting_engine},
        {7, "speed-and-shape", 1800, speed_and_shape},
        {8, "poisson-limit", 1200, poisson_limit},
        {9, "critical-front", 2400, critical_front},
        {10, "branching", 900, branching},
        {11, "surgery", 900, surgery},
        {12, "determinism", 300, determinism},
    };

    Json report = Json::array();
    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_budget = secs < c.budget_s;
        const bool pass = o.pass && in_budget;
        failures += !pass;
        std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " " << c.name << ": " << o.summary
                  << " [" << fmt(secs, 3) << " s of " << fmt(c.budget_s, 4) << " s"
                  << (in_budget ? "" : ", over budget") << "]" << std::endl;
        report.push_back({{"id", c.id},
                          {"name", c.name},
                          {"pass", pass},
                          {"summary", o.summary},
                          {"seconds", secs},
                          {"budget_s", c.budget_s}});
    }
    write_file_atomic(g_root / "acceptance.json", report.dump(2) + "\n");
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
