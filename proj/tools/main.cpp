#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rosch/config.hpp"
#include "rosch/errors.hpp"
#include "rosch/experiment.hpp"

namespace {

enum ExitCode { Ok = 0, Failure = 1, BadConfig = 2, MissingDependency = 3, NumericalFailure = 4 };

struct Options {
    std::string config;
    std::string workdir;
    std::vector<std::string> modes;
    std::vector<int> bcs;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::vector<std::string> overrides;
};

rosch::ExperimentConfig resolve(const Options& opt) {
    rosch::KeyValueConfig kv =
        opt.config.empty() ? rosch::KeyValueConfig{} : rosch::KeyValueConfig::load(opt.config);
    for (const auto& item : opt.overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw rosch::ConfigError("--set expects key=value, got '" + item + "'");
        }
        kv.set(item.substr(0, eq), item.substr(eq + 1));
    }
    if (const char* env = std::getenv("ROSCH_WORKDIR"); env != nullptr && *env != '\0') {
        kv.set("paths.workdir", env);
    }
    if (!opt.workdir.empty()) {
        kv.set("paths.workdir", opt.workdir);
    }
    if (opt.seed) {
        const std::string s = std::to_string(*opt.seed);
        kv.set("sampling.seed", s);
        kv.set("train.seed", s);
        kv.set("surrogate.init_seed", s);
    }
    if (opt.threads) {
        kv.set("run.threads", std::to_string(*opt.threads));
    }
    if (!opt.modes.empty()) {
        std::string joined;
        for (const auto& m : opt.modes) {
            joined += (joined.empty() ? "" : ",") + m;
        }
        kv.set("schwarz.modes", joined);
    }
    if (!opt.bcs.empty()) {
        std::string joined;
        for (int b : opt.bcs) {
            joined += (joined.empty() ? "" : ",") + std::to_string(b);
        }
        kv.set("schwarz.bcs", joined);
    }
    return rosch::ExperimentConfig::from(kv);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Overlapping Schwarz solver with learned boundary-to-boundary surrogates"};
    app.set_version_flag("--version", rosch::version_string());
    app.require_subcommand(1);

    Options opt;
    app.add_option("--config", opt.config, "Experiment config file (key = value lines)");
    app.add_option("--workdir", opt.workdir, "Output directory; overrides ROSCH_WORKDIR and paths.workdir");
    app.add_option("--seed", opt.seed, "Seed for sampling, splitting, shuffling and random init");
    app.add_option("--threads", opt.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--set", opt.overrides, "Override one config key (key=value), repeatable");
    app.add_option("--mode", opt.modes, "Schwarz mode(s) for solve: classical, surrogate, oracle, linear")
        ->delimiter(',');
    app.add_option("--bc", opt.bcs, "Boundary condition(s) for solve: 1, 2, 3")->delimiter(',');

    auto* gen = app.add_subcommand("gen-data", "Sample boundary data and local solutions per interior patch");
    auto* train = app.add_subcommand("train", "Fit one surrogate per interior patch");
    auto* solve = app.add_subcommand("solve", "Run the configured Schwarz modes against a monodomain reference");
    auto* spectrum = app.add_subcommand("spectrum", "Singular values of the linearized patch map");
    auto* report = app.add_subcommand("report", "Merge result rows into summary tables");
    app.fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Ok : BadConfig;
    }

    try {
        if (report->parsed()) {
            std::string workdir = opt.workdir;
            if (workdir.empty()) {
                workdir = resolve(opt).workdir.string();
            }
            const auto rows = rosch::cmd_report(workdir);
            std::cout << rows << " rows\n";
            return Ok;
        }
        const rosch::ExperimentConfig config = resolve(opt);
        rosch::RunManifest manifest;
        if (gen->parsed()) {
            manifest = rosch::cmd_gen_data(config);
        } else if (train->parsed()) {
            manifest = rosch::cmd_train(config);
        } else if (solve->parsed()) {
            manifest = rosch::cmd_solve(config);
        } else if (spectrum->parsed()) {
            manifest = rosch::cmd_spectrum(config);
        }
        std::cout << manifest.stage << ": " << manifest.files.size() << " files under " << config.workdir.string()
                  << '\n';
        return Ok;
    } catch (const rosch::DependencyError& e) {
        std::cerr << "dependency error: " << e.what() << '\n';
        return MissingDependency;
    } catch (const rosch::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return NumericalFailure;
    } catch (const rosch::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return BadConfig;
    } catch (const std::exception& e) {
        std::cerr << "unexpected failure: " << e.what() << '\n';
        return Failure;
    }
}
