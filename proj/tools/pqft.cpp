// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

// pqft: ingest, split, augment, train, eval, sweep and report over one JSON
// run configuration. Any config field can be overridden as --section.field.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pqft/error.hpp"
#include "pqft/pipeline.hpp"

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

// Turns leftover "--a.b value" / "--a.b=value" arguments into overrides.
Overrides collect_overrides(const std::vector<std::string>& extras) {
    Overrides out;
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& arg = extras[i];
        if (arg.rfind("--", 0) != 0 || arg.size() <= 2) {
            throw pqft::Error(pqft::ErrorKind::Configuration, "unexpected argument '" + arg + "'");
        }
        std::string key = arg.substr(2);
        if (const auto eq = key.find('='); eq != std::string::npos) {
            out.emplace_back(key.substr(0, eq), key.substr(eq + 1));
            continue;
        }
        if (i + 1 >= extras.size()) throw pqft::Error(pqft::ErrorKind::Configuration, "--" + key + " needs a value");
        out.emplace_back(std::move(key), extras[++i]);
    }
    return out;
}

void log_stderr(const std::string& line) { std::fprintf(stderr, "pqft: %s\n", line.c_str()); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Parameter-efficient fine-tuning and generative augmentation pipeline"};
    app.require_subcommand(1);
    app.fallthrough();
    app.allow_extras();

    std::optional<std::string> config_file;
    app.add_option("-c,--config", config_file, "JSON run configuration");

    auto* show = app.add_subcommand("config", "Print the effective configuration");
    auto* ingest = app.add_subcommand("ingest", "Validate the dataset and summarize it");
    auto* split = app.add_subcommand("split", "Write the train/validation/test manifest");
    auto* augment = app.add_subcommand("augment", "Generate augmented training records");
    auto* train = app.add_subcommand("train", "Fine-tune an adapter on the train split");
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    std::optional<std::string> checkpoint;
    eval->add_option("--checkpoint", checkpoint, "Checkpoint file (default: best.ckpt in paths.checkpoint_dir)");
    auto* sweep = app.add_subcommand("sweep", "Train and evaluate over the hyperparameter grid");
    auto* report = app.add_subcommand("report", "Merge report files into one table");
    std::vector<std::string> inputs;
    report->add_option("--input", inputs, "Report files (default: *report.json in paths.report_dir)");
    auto* synth = app.add_subcommand("synth", "Write a synthetic dataset in the labeled layout");
    std::string synth_out;
    std::size_t synth_n = 32;
    std::uint64_t synth_seed = 0;
    synth->add_option("--out", synth_out, "Output file")->required();
    synth->add_option("--n", synth_n, "Number of records");
    synth->add_option("--seed", synth_seed, "Generator seed");
    for (auto* sub : app.get_subcommands({})) sub->allow_extras();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (synth->parsed()) {
            if (!app.remaining(true).empty()) throw pqft::Error(pqft::ErrorKind::Configuration, "synth takes no config overrides");
            pqft::command_synth(synth_out, synth_n, synth_seed);
            log_stderr("wrote " + std::to_string(synth_n) + " records to " + synth_out);
            return 0;
        }
        std::optional<std::filesystem::path> file;
        if (config_file) file = *config_file;
        const pqft::RunConfig config = pqft::load_run_config(file, collect_overrides(app.remaining(true)));

        if (show->parsed()) {
            std::cout << config.to_json().dump(2) << "\n";
        } else if (ingest->parsed()) {
            pqft::command_ingest(config, log_stderr);
        } else if (split->parsed()) {
            pqft::command_split(config, log_stderr);
        } else if (augment->parsed()) {
            pqft::command_augment(config, nullptr, log_stderr);
        } else if (train->parsed()) {
            pqft::command_train(config, log_stderr);
        } else if (eval->parsed()) {
            std::optional<std::filesystem::path> path;
            if (checkpoint) path = *checkpoint;
            const auto result = pqft::command_eval(config, path, log_stderr);
            if (result.report.decode_failures > 0) return 2;
        } else if (sweep->parsed()) {
            const auto rows = pqft::command_sweep(config, log_stderr);
            std::cout << pqft::render_sweep_table(rows);
        } else if (report->parsed()) {
            std::vector<std::filesystem::path> paths(inputs.begin(), inputs.end());
            std::cout << pqft::command_report(config, paths, log_stderr);
        }
    } catch (const pqft::Error& e) {
        std::fprintf(stderr, "pqft: error: %s\n", e.what());
        return pqft::exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "pqft: error: %s\n", e.what());
        return 2;
    }
    return 0;
}
