#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace bfrog::exp {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Experiment names accepted by the runner, in CLI order.
const std::vector<std::string>& experiment_names();

/// Validated experiment configuration.
///
/// The common fields are typed; everything experiment-specific stays in
/// `params`, which already has the experiment defaults merged in.
struct ExperimentConfig {
    std::string experiment;
    int dim = 2;
    bool radius_critical = false;  // radius "critical": read r_hat from critical_artifact
    double radius = 0.0;           // numeric radius when not critical
    double radius_scale = 1.0;     // multiplies the resolved radius
    double box_side = 0.0;
    double t_max = 0.0;
    double dt_max = 1e-2;
    std::uint64_t replicas = 1;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    unsigned workers = 1;
    std::string critical_artifact;  // empty: <out_dir>/critical_radius.json
    Json params = Json::object();

    /// Effective configuration as JSON (defaults and overrides applied).
    Json to_json() const;
    double param(const std::string& key) const;
    std::uint64_t param_u(const std::string& key) const;
    std::vector<double> param_list(const std::string& key) const;
};

/// Defaults for an experiment (throws ConfigError for unknown names).
Json default_config(const std::string& experiment);

/// Merges `user` over the experiment defaults and validates. The experiment
/// name comes from `user["experiment"]`. Throws ConfigError.
ExperimentConfig parse_config(const Json& user);

/// Path of the r_hat artifact consulted for radius "critical".
std::filesystem::path critical_artifact_path(const ExperimentConfig& cfg);

/// Radius after resolving "critical" and applying radius_scale. Throws
/// ConfigError when the artifact is missing or malformed.
double resolve_radius(const ExperimentConfig& cfg);

struct Verdict {
    std::string name;
    double value = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::string target;
    std::uint64_t sample_size = 0;
    bool pass = false;
};

struct Artifact {
    std::string name;  // file name inside out_dir
    std::string content;
};

struct ExperimentResult {
    std::vector<Verdict> verdicts;
    std::vector<Artifact> artifacts;
    Json details = Json::object();

    bool all_pass() const;
    const Verdict* find(const std::string& name) const;
};

/// Runs the configured experiment in memory.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Git blob hash (SHA-1 of "blob <len>\0" + text) of the canonical config dump.
std::string config_hash(const ExperimentConfig& cfg);

/// summary.json document for a finished run.
Json summary_json(const ExperimentConfig& cfg, const ExperimentResult& res, double wall_seconds);

/// Runs, writes every artifact and summary.json atomically into out_dir and
/// returns the exit code: 0 all verdicts pass, 1 some verdict fails or the
/// run failed, 2 invalid configuration or missing inputs.
int run_to_dir(const ExperimentConfig& cfg, std::ostream& log);

/// Prints one line per verdict of out_dir/summary.json. Returns 2 when the
/// summary is missing or unreadable, 0 otherwise.
int report(const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);

/// Formats a verdict as a report line.
std::string format_verdict(const Verdict& v);

}  // namespace bfrog::exp
