// End-to-end checks of the command-line surface: exit codes, config file
// precedence, the HMLET_SEED override, and the prepare statistics.
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "oracles.hpp"

namespace fs = std::filesystem;

namespace {

std::string g_cli;
int g_failures = 0;

void check(bool ok, const std::string& what) {
    std::printf("[%s] %s\n", ok ? "ok" : "FAIL", what.c_str());
    if (!ok) ++g_failures;
}

int run(const std::string& cmd) {
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

int main(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; i += 2) {
        if (std::strcmp(argv[i], "--cli") == 0) g_cli = argv[i + 1];
    }
    if (g_cli.empty()) {
        std::fprintf(stderr, "usage: test_cli --cli <path>\n");
        return 1;
    }
    const fs::path base = fs::temp_directory_path() / "hmlet_cli_test";
    fs::remove_all(base);
    fs::create_directories(base);
    const std::string quiet = " > /dev/null 2>&1";

    // Usage errors exit with 2.
    check(run(g_cli + " train" + quiet) == 2, "train without required flags exits 2");
    check(run(g_cli + " bogus-subcommand" + quiet) == 2, "unknown subcommand exits 2");
    check(run(g_cli + quiet) == 2, "no subcommand exits 2");

    // Missing input file is a runtime failure.
    check(run(g_cli + " prepare --data /nonexistent.txt --out " + (base / "x").string() +
              quiet) == 1,
          "unreadable data exits 1");

    // Fixture.
    const auto raw = oracles::two_block_graph(30, 30, 0.5, 0.05, 3);
    const fs::path fixture = base / "raw.txt";
    {
        std::ofstream out(fixture);
        for (const auto& [u, v] : raw.pairs) out << u << ' ' << v << '\n';
    }

    // prepare: stats file carries the declared sparsity formula.
    const fs::path prep = base / "prep";
    check(run(g_cli + " --seed 4 prepare --data " + fixture.string() + " --out " +
              prep.string() + " --kcore 3" + quiet) == 0,
          "prepare succeeds");
    {
        const auto stats = nlohmann::json::parse(slurp(prep / "stats.json"));
        const double users = stats["users"].get<double>();
        const double items = stats["items"].get<double>();
        const double inter = stats["interactions"].get<double>();
        const double expect = 1.0 - inter / (users * items);
        check(std::abs(stats["sparsity"].get<double>() - expect) < 1e-12,
              "sparsity = 1 - interactions/(users*items)");
    }

    // train with a config file; CLI flags win over file keys.
    const fs::path cfg = base / "run.cfg";
    {
        std::ofstream out(cfg);
        out << "# desk-scale settings\n";
        out << "max_epochs = 3\n";
        out << "batch_size = 128\n";
        out << "D = 8\n";
        out << "patience = 50\n";
        out << "seed = 21\n";
    }
    const fs::path run_dir = base / "run";
    check(run(g_cli + " --config " + cfg.string() + " train --data " + prep.string() +
              " --out " + run_dir.string() + " --variant forced-linear" + quiet) == 0,
          "train with config file succeeds");
    {
        // 3 epochs from the config file -> 3 log lines; forced-linear keeps
        // every layer's linear share at 100%.
        std::ifstream log(run_dir / "train_log.jsonl");
        std::string line;
        int lines = 0;
        bool ratios_ok = true;
        while (std::getline(log, line)) {
            const auto j = nlohmann::json::parse(line);
            for (const auto& r : j["gate_linear_ratio"]) {
                if (r.get<double>() != 1.0) ratios_ok = false;
            }
            ++lines;
        }
        check(lines == 3, "config-file epoch count respected");
        check(ratios_ok, "forced-linear logs 100% linear at every layer");
    }

    // CLI flag overrides the config file.
    const fs::path run2 = base / "run2";
    check(run(g_cli + " --config " + cfg.string() + " train --data " + prep.string() +
              " --out " + run2.string() + " --variant forced-linear --epochs 2" + quiet) == 0,
          "train with flag override succeeds");
    {
        std::ifstream log(run2 / "train_log.jsonl");
        std::string line;
        int lines = 0;
        while (std::getline(log, line)) ++lines;
        check(lines == 2, "CLI flag beats config file");
    }

    // HMLET_SEED overrides the config seed: same command, different env,
    // different checkpoint bytes.
    const fs::path env_a = base / "env_a";
    const fs::path env_b = base / "env_b";
    const fs::path env_c = base / "env_c";
    const std::string train_tail = " train --data " + prep.string() +
                                   " --variant forced-linear --epochs 1 --dim 8 --batch 128";
    check(run("HMLET_SEED=100 " + g_cli + train_tail + " --out " + env_a.string() + quiet) == 0,
          "train with HMLET_SEED=100");
    check(run("HMLET_SEED=200 " + g_cli + train_tail + " --out " + env_b.string() + quiet) == 0,
          "train with HMLET_SEED=200");
    check(run("HMLET_SEED=100 " + g_cli + train_tail + " --out " + env_c.string() + quiet) == 0,
          "train with HMLET_SEED=100 again");
    const std::string a = slurp(env_a / "checkpoint_best.hmlt");
    const std::string b = slurp(env_b / "checkpoint_best.hmlt");
    const std::string c = slurp(env_c / "checkpoint_best.hmlt");
    check(!a.empty() && a != b, "HMLET_SEED changes the run");
    check(a == c, "same HMLET_SEED reproduces the run");

    // evaluate: bad checkpoint exits nonzero; good one emits valid JSON.
    check(run(g_cli + " evaluate --data " + prep.string() + " --checkpoint " +
              fixture.string() + quiet) == 1,
          "malformed checkpoint exits 1");
    const fs::path metrics = base / "metrics.json";
    check(run(g_cli + " evaluate --data " + prep.string() + " --checkpoint " +
              (run_dir / "checkpoint_best.hmlt").string() + " --split val --out " +
              metrics.string() + quiet) == 0,
          "evaluate succeeds");
    {
        const auto j = nlohmann::json::parse(slurp(metrics));
        check(j.contains("ndcg") && j.contains("recall") && j.contains("precision") &&
                  j["k"].get<int>() == 20,
              "metrics report schema");
        check(j["variant"] == "forced-linear", "variant recorded in the report");
    }

    // analyze on a gated variant emits the full report.
    const fs::path gated = base / "gated";
    check(run(g_cli + " --seed 5 train --data " + prep.string() + " --out " + gated.string() +
              " --variant End --epochs 2 --dim 8 --batch 128" + quiet) == 0,
          "train End variant");
    const fs::path analysis = base / "analysis.json";
    check(run(g_cli + " analyze --data " + prep.string() + " --checkpoint " +
              (gated / "checkpoint_best.hmlt").string() + " --out " + analysis.string() +
              quiet) == 0,
          "analyze succeeds");
    {
        const auto j = nlohmann::json::parse(slurp(analysis));
        check(j.contains("class_sizes_pct") && j.contains("degree_bins") &&
                  j.contains("centrality") && j.contains("similarity") &&
                  j.contains("gate_ratio_table"),
              "analysis report schema");
        check(j["gate_ratio_table"].size() == 4, "gate ratio table covers all four layers");
    }

    // analyze rejects a variant without gated layers.
    check(run(g_cli + " analyze --data " + prep.string() + " --checkpoint " +
              (run_dir / "checkpoint_best.hmlt").string() + quiet) == 1,
          "analyze without gated layers exits 1");

    fs::remove_all(base);
    if (g_failures == 0) std::printf("all CLI checks passed\n");
    return g_failures;
}
