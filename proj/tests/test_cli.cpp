// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

// Runs the pqft binary and checks exit statuses.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / ("pqft_cli_" + std::to_string(::getpid()));

int run(const std::string& args) {
    const std::string cmd = "cd '" + kDir.string() + "' && '" PQFT_CLI_PATH "' " + args + " >out.txt 2>err.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string err_text() {
    std::ifstream in(kDir / "err.txt");
    return std::string(std::istreambuf_iterator<char>(in), {});
}

struct Workspace {
    Workspace() {
        fs::remove_all(kDir);
        fs::create_directories(kDir);
        std::ofstream(kDir / "run.json") << R"({
          "paths": {"dataset": "data.json"},
          "model": {"n_layers": 1, "n_heads": 2, "d_model": 32, "d_ff": 64, "max_seq_len": 192},
          "train": {"learning_rate": 0.005, "grad_accum_steps": 1, "warmup_steps": 1,
                    "max_optimizer_steps": 2, "eval_every": 2},
          "decode": {"num_beams": 1, "max_new_tokens": 8},
          "eval": {"split": "validation"}
        })";
    }
    ~Workspace() { fs::remove_all(kDir); }
};

}  // namespace

TEST_CASE("command line exit statuses") {
    Workspace ws;
    CHECK(run("") == 1);
    CHECK(run("--help") == 0);
    CHECK(run("frobnicate") == 1);
    CHECK(run("synth --out data.json --n 40 --seed 2") == 0);
    CHECK(fs::exists(kDir / "data.json"));

    CHECK(run("-c run.json config --train.nonsense 1") == 1);
    CHECK(run("-c run.json config --train.learning_rate") == 1);
    CHECK(run("-c missing.json config") == 1);
    CHECK(run("-c run.json config --seed 9") == 0);

    // Missing dataset: data error and nothing written.
    CHECK(run("-c run.json split --paths.dataset nowhere.json") == 2);
    CHECK_FALSE(fs::exists(kDir / "run" / "split.json"));

    CHECK(run("-c run.json ingest") == 0);
    CHECK(run("-c run.json split") == 0);
    CHECK(run("-c run.json augment --augment.split test") == 2);
    CHECK(err_text().find("leakage") != std::string::npos);
    CHECK_FALSE(fs::exists(kDir / "run" / "augmented.jsonl"));
    CHECK(run("-c run.json augment") == 0);
    CHECK(fs::exists(kDir / "run" / "augmented.jsonl"));
    CHECK(fs::exists(kDir / "run" / "reports" / "augment_summary.json"));

    // Nothing listens on port 9: connection refused, retried, then exit 3.
    CHECK(run("-c run.json augment --augment.backend remote --augment.base_url http://127.0.0.1:9/v1 "
              "--augment.retry_backoff_ms 1 --augment.model gpt-x --paths.cache_dir cache2") == 3);
    CHECK(fs::exists(kDir / "run" / "reports" / "augment_progress.json"));

    CHECK(run("-c run.json train --train.learning_rate 1e30 --train.max_optimizer_steps 4") == 4);
    CHECK(run("-c run.json train --corpus.use_augmented true") == 0);
    CHECK(run("-c run.json eval --corpus.use_augmented true") == 0);
    CHECK(run("-c run.json eval --checkpoint nope.ckpt") == 2);
    CHECK(run("-c run.json report") == 0);
    std::ifstream table(kDir / "run" / "reports" / "table.md");
    const std::string text(std::istreambuf_iterator<char>(table), {});
    CHECK(text.find("| toy-slm | rewriteQA |") != std::string::npos);
}
