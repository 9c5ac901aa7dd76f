#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "gestura/config.hpp"
#include "gestura/errors.hpp"
#include "gestura/experiment.hpp"

namespace {

using namespace gestura;
namespace fs = std::filesystem;

enum Exit { kOk = 0, kFailure = 1, kInput = 2, kIo = 3, kNumeric = 4 };

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
    std::string scale;
    bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "TOML experiment config")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
    cmd->add_option("--out", c.out, "run directory (overrides output_dir)");
    cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--scale", c.scale, "preset used when no config is given")->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_flag("-q,--quiet", c.quiet, "no progress output");
}

ExperimentConfig resolve(const Common& c) {
    ExperimentConfig cfg;
    if (!c.config.empty()) {
        cfg = load_config(c.config);
        if (!c.scale.empty() && c.scale != to_string(cfg.scale)) {
            throw ConfigError("--scale " + c.scale + " conflicts with scale = \"" + to_string(cfg.scale) + "\" in " +
                              c.config);
        }
    } else {
        cfg = ExperimentConfig::for_scale(c.scale == "paper" ? Scale::Paper : Scale::Desk);
    }
    if (c.seed) {
        cfg.seed = *c.seed;
        cfg.dataset.seed = *c.seed;
    }
    if (!c.out.empty()) cfg.output_dir = c.out;
    cfg.validate();
    return cfg;
}

StageOptions stage_options(const ExperimentConfig& cfg, const Common& c) {
    return {fs::path(cfg.output_dir), c.threads, c.quiet ? nullptr : &std::cerr};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multimodal gesture recognition with federated training and an adaptive AR interface"};
    app.set_version_flag("--version", std::string(tool_version()));
    app.require_subcommand(1);

    Common common;

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
    add_common(gen, common);
    bool dump = false;
    gen->add_flag("--dump-csv", dump, "also write per-modality CSV files");

    auto* train = app.add_subcommand("train", "federated training of the fused and baseline recognizers");
    add_common(train, common);
    std::optional<std::size_t> rounds;
    bool resume = false;
    train->add_option("--rounds", rounds, "override the number of rounds (0 writes the initial checkpoint)");
    train->add_flag("--resume", resume, "continue from the saved training state");

    auto* adapt = app.add_subcommand("adapt", "train the interface adaptation policy");
    add_common(adapt, common);
    std::optional<std::size_t> episodes;
    adapt->add_option("--episodes", episodes, "override the number of training episodes");

    auto* eval = app.add_subcommand("evaluate", "compare the full system with the baselines");
    add_common(eval, common);
    bool json_only = false;
    eval->add_flag("--json-only", json_only, "write metrics.json but not table1.csv");

    auto* report = app.add_subcommand("report", "summarize and verify a run directory");
    add_common(report, common);

    auto* show = app.add_subcommand("config", "print the effective configuration as TOML");
    add_common(show, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kInput;
    }

    try {
        const auto cfg = resolve(common);
        const auto stage = stage_options(cfg, common);
        if (gen->parsed()) {
            cmd_gen_data(cfg, stage, {dump});
        } else if (train->parsed()) {
            cmd_train(cfg, stage, {rounds, resume});
        } else if (adapt->parsed()) {
            cmd_adapt(cfg, stage, {episodes});
        } else if (eval->parsed()) {
            const auto rows = cmd_evaluate(cfg, stage, {json_only});
            std::cout << format_table(rows);
        } else if (report->parsed()) {
            return cmd_report(stage.out, std::cout) ? kOk : kIo;
        } else if (show->parsed()) {
            std::cout << to_toml(cfg);
        }
        return kOk;
    } catch (const NumericError& e) {
        std::cerr << "numeric error";
        if (e.round_index >= 0) std::cerr << " in round " << e.round_index;
        std::cerr << ": " << e.what() << '\n';
        return kNumeric;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kInput;
    } catch (const std::invalid_argument& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
}
