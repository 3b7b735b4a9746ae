#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>

#include "bfrog/csv.hpp"
#include "bfrog/errors.hpp"
#include "bfrog/experiments.hpp"
#include "bfrog/stats.hpp"

using namespace bfrog;
using bfrog::exp::Json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("bfrog_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run(const std::string& args, const fs::path& capture = {}) {
    std::string cmd = std::string(FROGSIM_BIN) + " " + args;
    cmd += capture.empty() ? " >/dev/null 2>&1" : " >" + capture.string() + " 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST(Config, DefaultsMergedAndUnknownFieldsRejected) {
    const auto cfg = exp::parse_config({{"experiment", "bm-bounds"}, {"replicas", 10}});
    EXPECT_EQ(cfg.replicas, 10u);
    EXPECT_EQ(cfg.param_list("ells").size(), 3u);
    EXPECT_THROW(exp::parse_config({{"experiment", "bm-bounds"}, {"bogus", 1}}), ConfigError);
    EXPECT_THROW(exp::parse_config({{"experiment", "nope"}}), ConfigError);
    EXPECT_THROW(exp::parse_config({{"experiment", "speed"}, {"replicas", 0}}), ConfigError);
    EXPECT_THROW(exp::parse_config({{"experiment", "speed"}, {"radius", "big"}}), ConfigError);
}

TEST(Config, HashIsStableAndSensitive) {
    const auto a = exp::parse_config({{"experiment", "surgery"}});
    const auto b = exp::parse_config({{"experiment", "surgery"}});
    const auto c = exp::parse_config({{"experiment", "surgery"}, {"seed", 2}});
    EXPECT_EQ(exp::config_hash(a), exp::config_hash(b));
    EXPECT_NE(exp::config_hash(a), exp::config_hash(c));
    EXPECT_EQ(exp::config_hash(a).size(), 40u);
}

TEST(Config, CriticalRadiusReadFromArtifact) {
    const auto dir = scratch("artifact");
    auto cfg = exp::parse_config({{"experiment", "speed"}, {"out_dir", dir.string()}});
    EXPECT_THROW(exp::resolve_radius(cfg), ConfigError);
    write(dir / "critical_radius.json", R"({"r_hat": 1.2})");
    EXPECT_NEAR(exp::resolve_radius(cfg), 0.84, 1e-12);
    write(dir / "critical_radius.json", R"({"r_hat": "x"})");
    EXPECT_THROW(exp::resolve_radius(cfg), ConfigError);
}

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("no-such-experiment"), 2);
    const auto dir = scratch("empty");
    EXPECT_EQ(run("report --out " + dir.string()), 2);
    write(dir / "bad.json", R"({"unknown_field": 3})");
    EXPECT_EQ(run("bm-bounds --config " + (dir / "bad.json").string() + " --out " + dir.string()), 2);
    EXPECT_EQ(run("speed --radius critical --out " + dir.string()), 2);
    EXPECT_EQ(run("speed --radius abc --out " + dir.string()), 2);
    EXPECT_FALSE(fs::exists(dir / "summary.json"));
}

TEST(Cli, BmBoundsWritesSummaryAndReport) {
    const auto dir = scratch("bm");
    ASSERT_EQ(run("bm-bounds --replicas 2000 --out " + dir.string()), 0);
    ASSERT_TRUE(fs::exists(dir / "summary.json"));
    ASSERT_TRUE(fs::exists(dir / "bm_bounds.csv"));
    const auto sum = Json::parse(slurp(dir / "summary.json"));
    EXPECT_EQ(sum["schema_version"], exp::kSchemaVersion);
    EXPECT_TRUE(sum["all_pass"].get<bool>());
    EXPECT_EQ(sum["verdicts"].size(), 3u);
    ASSERT_EQ(run("report --out " + dir.string(), dir / "report.txt"), 0);
    std::istringstream lines(slurp(dir / "report.txt"));
    std::string line;
    int verdict_lines = 0;
    while (std::getline(lines, line))
        if (line.rfind("bm_bounds_ell", 0) == 0) {
            ++verdict_lines;
            EXPECT_NE(line.find("PASS"), std::string::npos);
        }
    EXPECT_EQ(verdict_lines, 3);
}

TEST(Cli, DeterministicAcrossWorkers) {
    const auto a = scratch("det_a"), b = scratch("det_b");
    ASSERT_EQ(run("cluster-tail --radius 0.7 --replicas 10000 --workers 1 --out " + a.string()), 0);
    ASSERT_EQ(run("cluster-tail --radius 0.7 --replicas 10000 --workers 3 --out " + b.string()), 0);
    for (const auto* f : {"cluster_sizes.csv", "survival.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    auto sa = Json::parse(slurp(a / "summary.json")), sb = Json::parse(slurp(b / "summary.json"));
    EXPECT_EQ(sa["verdicts"], sb["verdicts"]);
    EXPECT_NE(sa["config_hash"], sb["config_hash"]);  // workers and out_dir are part of the config
}

TEST(Cli, SpeedSummaryMatchesPassageCsv) {
    const auto dir = scratch("speed");
    write(dir / "cfg.json", R"({"box_side": 60, "t_max": 10, "n_min": 5, "n_max": 12})");
    ASSERT_NE(run("speed --config " + (dir / "cfg.json").string() + " --radius 0.84 --replicas 4 --out " +
                  dir.string()),
              2);
    const auto csv = read_csv(dir / "passage.csv");
    const int c_rep = csv.column("replica"), c_ray = csv.column("ray"), c_n = csv.column("n"),
              c_t = csv.column("T"), c_awake = csv.column("awake");
    std::map<std::string, std::vector<std::vector<PassageSample>>> by_ray;
    for (const auto& row : csv.rows) {
        auto& reps = by_ray[row[c_ray]];
        const auto i = std::stoul(row[c_rep]);
        if (reps.size() <= i) reps.resize(i + 1);
        PassageSample s;
        s.n = std::stoi(row[c_n]);
        s.awake = row[c_awake] == "true";
        s.T = std::stod(row[c_t]);
        reps[i].push_back(s);
    }
    ASSERT_EQ(by_ray.size(), 2u);
    const double g1 = estimate_speed(by_ray["e1"], 0.84, true).gamma_tilde;
    const double g2 = estimate_speed(by_ray["e2"], 0.84, true).gamma_tilde;
    const auto sum = Json::parse(slurp(dir / "summary.json"));
    EXPECT_NEAR(sum["details"]["gamma_tilde"].get<double>(), 0.5 * (g1 + g2), 1e-12);
    EXPECT_NEAR(sum["details"]["gamma"].get<double>(), 2.0 / (g1 + g2), 1e-9);
}
