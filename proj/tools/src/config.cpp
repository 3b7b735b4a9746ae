#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <openssl/evp.h>

#include "bfrog/csv.hpp"
#include "bfrog/errors.hpp"
#include "bfrog/experiments.hpp"

namespace bfrog::exp {

namespace fs = std::filesystem;

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {
        "speed",   "shape",       "poisson-test", "critical-front", "crossing",
        "cluster-tail", "branching", "surgery",  "bm-bounds",      "critical-radius"};
    return names;
}

namespace {

const char* const kCommon[] = {"experiment", "dim",      "radius",  "radius_scale",
                               "box_side",   "t_max",    "dt_max",  "replicas",
                               "seed",       "out_dir",  "workers", "critical_artifact"};

bool is_common(const std::string& key) {
    return std::find(std::begin(kCommon), std::end(kCommon), key) != std::end(kCommon);
}

Json experiment_defaults(const std::string& e) {
    if (e == "speed")
        return {{"radius", "critical"}, {"radius_scale", 0.7}, {"box_side", 120.0}, {"t_max", 20.0},
                {"replicas", 20},       {"n_min", 20},         {"n_max", 40},       {"check_dt", 0.25}};
    if (e == "shape")
        return {{"radius", "critical"}, {"radius_scale", 0.7}, {"box_side", 700.0},
                {"t_max", 12.0},        {"replicas", 20},      {"sample_dt", 0.05},
                {"front_cap", 0.8},     {"n_max", 40},         {"events_replicas", 1}};
    if (e == "critical-front")
        return {{"radius", "critical"},   {"box_side", 700.0},         {"t_max", 12.0},
                {"replicas", 10},         {"compare_scale", 0.7},      {"sample_dt", 0.05},
                {"critical_sample_dt", 0.0005}, {"critical_t_max", 2.0}, {"front_cap", 0.8},
                {"n_max", 40}};
    if (e == "poisson-test")
        return {{"dim", 1},
                {"radius", 0.5},
                {"box_side", 400.0},
                {"t_max", 50.0},
                {"replicas", 4000},
                {"windows", Json::array({Json::array({-1.5, 1.5}), Json::array({2.0, 5.0}),
                                         Json::array({-5.0, -2.0})})},
                {"front_factor", 3.0},
                {"min_valid", 1000},
                {"alpha", 0.01}};
    if (e == "crossing")
        return {{"radius", "critical"},  {"replicas", 2000},   {"n_values", {5.0, 10.0, 20.0}},
                {"aspect", 3.0},         {"sub_scale", 0.6},   {"split_effort", 2000},
                {"split_runs", 20},      {"split_level_width", 1.25}, {"p_floor", 0.05},
                {"leftmost_replicas", 2000}};
    if (e == "cluster-tail")
        return {{"radius", "critical"}, {"radius_scale", 0.6}, {"replicas", 20000},
                {"box_side", 0.0},      {"min_r2", 0.98},      {"max_truncation", 0.01}};
    if (e == "branching")
        return {{"radius", "critical"}, {"radius_scale", 0.6},     {"replicas", 200},
                {"gen_max", 5},         {"env_side", 16.0},        {"tau_cap", 1000.0},
                {"tau_reference", 2000}, {"offspring_samples", 20000}, {"particle_csv_replicas", 1},
                {"min_r2", 0.98},       {"alpha", 0.01}};
    if (e == "surgery")
        return {{"box_side", 10.0},     {"replicas", 10000}, {"sausage_r", 0.25},
                {"sausage_dt", 0.0},    {"families", {"balls", "sausage"}}, {"alpha", 0.01}};
    if (e == "bm-bounds")
        return {{"replicas", 100000}, {"k", 1.0}, {"ells", {1, 2, 3}}, {"steps_per_k2", 400}};
    if (e == "critical-radius")
        return {{"replicas", 1000},  {"n", 40.0},          {"tol", 0.005},  {"r_lo", 0.8},
                {"r_hi", 1.6},       {"seeds", 3},         {"compare_n", 10.0},
                {"seed_spread_tol", 0.02}, {"window_shift_tol", 0.1}};
    throw ConfigError("unknown experiment '" + e + "'");
}

double positive_number(const Json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_number())
        throw ConfigError("field '" + key + "' must be a number");
    const double v = j[key].get<double>();
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("field '" + key + "' must be positive");
    return v;
}

std::uint64_t positive_integer(const Json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<std::int64_t>() < 1)
        throw ConfigError("field '" + key + "' must be a positive integer");
    return j[key].get<std::uint64_t>();
}

}  // namespace

Json default_config(const std::string& experiment) {
    Json d = {{"experiment", experiment}, {"dim", 2},         {"radius", 1.0},
              {"radius_scale", 1.0},      {"box_side", 40.0}, {"t_max", 10.0},
              {"dt_max", 1e-2},           {"replicas", 1},    {"seed", 1},
              {"out_dir", "out"},         {"workers", 1}};
    d.update(experiment_defaults(experiment));
    if (d["box_side"].get<double>() == 0.0) d.erase("box_side");  // derived from r
    return d;
}

ExperimentConfig parse_config(const Json& user) {
    if (!user.is_object()) throw ConfigError("config must be a JSON object");
    if (!user.contains("experiment") || !user["experiment"].is_string())
        throw ConfigError("config needs a string field 'experiment'");
    const auto name = user["experiment"].get<std::string>();
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), name) == names.end())
        throw ConfigError("unknown experiment '" + name + "'");

    Json j = default_config(name);
    for (const auto& [k, v] : user.items()) {
        if (!is_common(k) && !j.contains(k))
            throw ConfigError("unknown field '" + k + "' for experiment " + name);
        j[k] = v;
    }

    ExperimentConfig c;
    c.experiment = name;
    if (!j["dim"].is_number_integer() || j["dim"].get<int>() < 1 || j["dim"].get<int>() > 3)
        throw ConfigError("field 'dim' must be 1, 2 or 3");
    c.dim = j["dim"].get<int>();

    const auto& rad = j["radius"];
    if (rad.is_string()) {
        if (rad.get<std::string>() != "critical")
            throw ConfigError("field 'radius' must be a number or \"critical\"");
        c.radius_critical = true;
    } else {
        c.radius = positive_number(j, "radius");
    }
    c.radius_scale = positive_number(j, "radius_scale");
    if (j.contains("box_side")) {
        if (!j["box_side"].is_number()) throw ConfigError("field 'box_side' must be a number");
        c.box_side = j["box_side"].get<double>();
        if (c.box_side != 0.0) c.box_side = positive_number(j, "box_side");
    }
    c.t_max = positive_number(j, "t_max");
    c.dt_max = positive_number(j, "dt_max");
    c.replicas = positive_integer(j, "replicas");
    if (!j["seed"].is_number_integer() || j["seed"].get<std::int64_t>() < 0)
        throw ConfigError("field 'seed' must be a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
    if (!j["out_dir"].is_string() || j["out_dir"].get<std::string>().empty())
        throw ConfigError("field 'out_dir' must be a non-empty string");
    c.out_dir = j["out_dir"].get<std::string>();
    c.workers = static_cast<unsigned>(positive_integer(j, "workers"));
    if (j.contains("critical_artifact")) {
        if (!j["critical_artifact"].is_string())
            throw ConfigError("field 'critical_artifact' must be a string");
        c.critical_artifact = j["critical_artifact"].get<std::string>();
    }

    for (const auto& [k, v] : j.items()) {
        if (is_common(k)) continue;
        if (v.is_number() && !(v.get<double>() >= 0.0))
            throw ConfigError("field '" + k + "' must be non-negative");
        c.params[k] = v;
    }
    return c;
}

Json ExperimentConfig::to_json() const {
    Json j = params;
    j["experiment"] = experiment;
    j["dim"] = dim;
    if (radius_critical)
        j["radius"] = "critical";
    else
        j["radius"] = radius;
    j["radius_scale"] = radius_scale;
    if (box_side > 0.0) j["box_side"] = box_side;
    j["t_max"] = t_max;
    j["dt_max"] = dt_max;
    j["replicas"] = replicas;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["workers"] = workers;
    if (!critical_artifact.empty()) j["critical_artifact"] = critical_artifact;
    return j;
}

double ExperimentConfig::param(const std::string& key) const {
    if (!params.contains(key) || !params[key].is_number())
        throw ConfigError("missing numeric parameter '" + key + "'");
    return params[key].get<double>();
}

std::uint64_t ExperimentConfig::param_u(const std::string& key) const {
    if (!params.contains(key) || !params[key].is_number_integer())
        throw ConfigError("missing integer parameter '" + key + "'");
    return params[key].get<std::uint64_t>();
}

std::vector<double> ExperimentConfig::param_list(const std::string& key) const {
    if (!params.contains(key) || !params[key].is_array())
        throw ConfigError("missing list parameter '" + key + "'");
    std::vector<double> out;
    for (const auto& v : params[key]) {
        if (!v.is_number()) throw ConfigError("list parameter '" + key + "' must hold numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

fs::path critical_artifact_path(const ExperimentConfig& cfg) {
    if (!cfg.critical_artifact.empty()) return cfg.critical_artifact;
    return fs::path(cfg.out_dir) / "critical_radius.json";
}

double resolve_radius(const ExperimentConfig& cfg) {
    if (!cfg.radius_critical) return cfg.radius * cfg.radius_scale;
    const auto path = critical_artifact_path(cfg);
    std::ifstream in(path);
    if (!in) throw ConfigError("radius \"critical\" needs " + path.string() +
                               " (run the critical-radius experiment first)");
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("cannot parse " + path.string() + ": " + e.what());
    }
    if (!j.contains("r_hat") || !j["r_hat"].is_number() || !(j["r_hat"].get<double>() > 0.0))
        throw ConfigError(path.string() + " has no positive r_hat");
    return j["r_hat"].get<double>() * cfg.radius_scale;
}

bool ExperimentResult::all_pass() const {
    return !verdicts.empty() &&
           std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

const Verdict* ExperimentResult::find(const std::string& name) const {
    for (const auto& v : verdicts)
        if (v.name == name) return &v;
    return nullptr;
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string text = cfg.to_json().dump();
    const std::string blob = "blob " + std::to_string(text.size()) + '\0' + text;
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr) != 1)
        throw ComputationError("SHA-1 digest failed");
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

namespace {

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double number_from(const Json& j) {
    return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

Json summary_json(const ExperimentConfig& cfg, const ExperimentResult& res, double wall_seconds) {
    Json verdicts = Json::array();
    for (const auto& v : res.verdicts)
        verdicts.push_back({{"name", v.name},
                            {"value", number_or_null(v.value)},
                            {"ci", {number_or_null(v.ci_lo), number_or_null(v.ci_hi)}},
                            {"target", v.target},
                            {"sample_size", v.sample_size},
                            {"pass", v.pass}});
    Json artifacts = Json::array();
    for (const auto& a : res.artifacts) artifacts.push_back(a.name);
    return {{"schema_version", kSchemaVersion},
            {"experiment", cfg.experiment},
            {"config", cfg.to_json()},
            {"config_hash", config_hash(cfg)},
            {"wall_time_s", wall_seconds},
            {"verdicts", verdicts},
            {"all_pass", res.all_pass()},
            {"artifacts", artifacts},
            {"details", res.details}};
}

int run_to_dir(const ExperimentConfig& cfg, std::ostream& log) {
    const auto start = std::chrono::steady_clock::now();
    ExperimentResult res;
    try {
        res = run_experiment(cfg);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        log << "run failed: " << e.what() << '\n';
        return 1;
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    try {
        const fs::path dir(cfg.out_dir);
        fs::create_directories(dir);
        for (const auto& a : res.artifacts) write_file_atomic(dir / a.name, a.content);
        write_file_atomic(dir / "summary.json", summary_json(cfg, res, wall).dump(2) + "\n");
    } catch (const std::exception& e) {
        log << "writing artifacts failed: " << e.what() << '\n';
        return 1;
    }
    for (const auto& v : res.verdicts) log << format_verdict(v) << '\n';
    return res.all_pass() ? 0 : 1;
}

std::string format_verdict(const Verdict& v) {
    std::ostringstream os;
    os << v.name << ": " << format_double(v.value) << " [" << format_double(v.ci_lo) << ", "
       << format_double(v.ci_hi) << "] target " << v.target << " (n=" << v.sample_size << ") "
       << (v.pass ? "PASS" : "FAIL");
    return os.str();
}

int report(const fs::path& out_dir, std::ostream& out, std::ostream& err) {
    const auto path = out_dir / "summary.json";
    std::ifstream in(path);
    if (!in) {
        err << "missing " << path.string() << '\n';
        return 2;
    }
    Json j;
    try {
        in >> j;
        if (!j.contains("verdicts") || !j["verdicts"].is_array())
            throw ConfigError("no verdicts array");
        out << j.at("experiment").get<std::string>() << " (schema "
            << j.at("schema_version").get<int>() << ", config " << j.at("config_hash").get<std::string>()
            << ")\n";
        for (const auto& jv : j["verdicts"]) {
            Verdict v;
            v.name = jv.at("name").get<std::string>();
            v.value = number_from(jv.at("value"));
            v.ci_lo = number_from(jv.at("ci").at(0));
            v.ci_hi = number_from(jv.at("ci").at(1));
            v.target = jv.at("target").get<std::string>();
            v.sample_size = jv.at("sample_size").get<std::uint64_t>();
            v.pass = jv.at("pass").get<bool>();
            out << format_verdict(v) << '\n';
        }
    } catch (const std::exception& e) {
        err << "unreadable " << path.string() << ": " << e.what() << '\n';
        return 2;
    }
    return 0;
}

}  // namespace bfrog::exp
