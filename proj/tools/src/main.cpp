#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bfrog/errors.hpp"
#include "bfrog/experiments.hpp"

namespace {

struct Overrides {
    std::string config_path;
    std::string radius;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> replicas;
    std::string out;
    std::optional<unsigned> workers;
};

// Reads the config file (if any) and applies command-line overrides.
bfrog::exp::Json build_config(const std::string& experiment, const Overrides& o) {
    using bfrog::exp::Json;
    Json j = Json::object();
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw bfrog::ConfigError("cannot open config " + o.config_path);
        try {
            in >> j;
        } catch (const std::exception& e) {
            throw bfrog::ConfigError("cannot parse config: " + std::string(e.what()));
        }
        if (!j.is_object()) throw bfrog::ConfigError("config must be a JSON object");
        if (j.contains("experiment") && j["experiment"] != experiment)
            throw bfrog::ConfigError("config is for experiment " + j["experiment"].dump());
    }
    j["experiment"] = experiment;
    if (!o.radius.empty()) {
        if (o.radius == "critical") {
            j["radius"] = "critical";
        } else {
            try {
                std::size_t used = 0;
                const double r = std::stod(o.radius, &used);
                if (used != o.radius.size()) throw std::invalid_argument("trailing");
                j["radius"] = r;
                j["radius_scale"] = 1.0;  // a literal radius is used as given
            } catch (const std::logic_error&) {
                throw bfrog::ConfigError("--radius must be a number or 'critical'");
            }
        }
    }
    if (o.seed) j["seed"] = *o.seed;
    if (o.replicas) j["replicas"] = *o.replicas;
    if (!o.out.empty()) j["out_dir"] = o.out;
    if (o.workers) j["workers"] = *o.workers;
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Brownian frog model experiments"};
    app.require_subcommand(1);

    Overrides ov;
    std::string chosen;
    for (const auto& name : bfrog::exp::experiment_names()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--config", ov.config_path, "JSON config file");
        sub->add_option("--radius", ov.radius, "radius, or 'critical' to use r_hat");
        sub->add_option("--seed", ov.seed, "master seed");
        sub->add_option("--replicas", ov.replicas, "number of replicas");
        sub->add_option("--out", ov.out, "output directory");
        sub->add_option("--workers", ov.workers, "worker threads");
        sub->callback([&chosen, name] { chosen = name; });
    }
    std::string report_dir;
    auto* rep = app.add_subcommand("report", "print the verdicts of a finished run");
    rep->add_option("--out", report_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (rep->parsed()) return bfrog::exp::report(report_dir, std::cout, std::cerr);

    bfrog::exp::ExperimentConfig cfg;
    try {
        cfg = bfrog::exp::parse_config(build_config(chosen, ov));
    } catch (const bfrog::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
    return bfrog::exp::run_to_dir(cfg, std::cerr);
}
