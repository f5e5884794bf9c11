// Command-line front end: prepare / train / evaluate / analyze.
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <omp.h>

#include <CLI11.hpp>

#include "hmlet/analysis.hpp"
#include "hmlet/checkpoint.hpp"
#include "hmlet/evaluator.hpp"
#include "hmlet/graph.hpp"
#include "hmlet/model.hpp"
#include "hmlet/reports.hpp"
#include "hmlet/trainer.hpp"

namespace {

using namespace hmlet;

// Line-oriented "key = value" config file with TrainConfig key names.
std::map<std::string, std::string> load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos) {
                throw ConfigError(path + " line " + std::to_string(line_no) +
                                  ": expected 'key = value'");
            }
            continue;
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError(path + " line " + std::to_string(line_no) +
                              ": expected 'key = value'");
        }
        kv[key] = value;
    }
    return kv;
}

struct CommonArgs {
    std::string config_path;
    int threads = 0;
    std::uint64_t seed = 2021;
    bool seed_from_cli = false;
};

// Precedence: CLI flag > HMLET_SEED > config file > default.
void resolve_common(CommonArgs& common, const std::map<std::string, std::string>& file_cfg) {
    if (!common.seed_from_cli) {
        if (const char* env = std::getenv("HMLET_SEED")) {
            common.seed = std::strtoull(env, nullptr, 10);
        } else if (auto it = file_cfg.find("seed"); it != file_cfg.end()) {
            common.seed = std::strtoull(it->second.c_str(), nullptr, 10);
        }
    }
    if (common.threads > 0) omp_set_num_threads(common.threads);
}

template <typename T>
void maybe_set(T& target, const std::map<std::string, std::string>& cfg, const std::string& key,
               bool cli_given) {
    if (cli_given) return;
    const auto it = cfg.find(key);
    if (it == cfg.end()) return;
    std::istringstream iss(it->second);
    T v;
    if (!(iss >> v)) throw ConfigError("config key '" + key + "': cannot parse '" + it->second + "'");
    target = v;
}

Activation parse_activation(const std::string& s) {
    if (s == "leaky_relu") return Activation::LeakyRelu;
    if (s == "elu") return Activation::Elu;
    throw ConfigError("unknown activation '" + s + "' (expected leaky_relu or elu)");
}

void emit_json(const nlohmann::ordered_json& j, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot write " + out_path);
        out << j.dump(2) << "\n";
    }
}

int cmd_prepare(const std::string& data, const std::string& out_dir, std::size_t kcore,
                std::uint64_t seed) {
    const RawInteractions raw = load_interactions_file(data);
    const RawInteractions filtered = kcore_filter(raw, kcore);
    const InteractionGraph graph = split(filtered, {}, seed);
    write_prepared(graph, out_dir);

    std::size_t interactions = 0;
    for (const auto& lists : {&graph.train, &graph.val, &graph.test}) {
        for (const auto& l : *lists) interactions += l.size();
    }
    const double sparsity = 1.0 - static_cast<double>(interactions) /
                                      (static_cast<double>(graph.num_users) *
                                       static_cast<double>(graph.num_items));
    nlohmann::ordered_json stats;
    stats["users"] = graph.num_users;
    stats["items"] = graph.num_items;
    stats["interactions"] = interactions;
    stats["sparsity"] = sparsity;
    stats["kcore"] = kcore;
    stats["seed"] = seed;
    {
        std::ofstream out(out_dir + "/stats.json");
        out << stats.dump(2) << "\n";
    }
    std::cout << "users=" << graph.num_users << " items=" << graph.num_items
              << " interactions=" << interactions << " sparsity=" << sparsity << "\n";
    return 0;
}

int cmd_train(const std::string& data, const std::string& out_dir, const TrainConfig& cfg,
              const std::string& variant) {
    const InteractionGraph graph = read_prepared(data);
    const VariantSpec spec = layer_plan(variant);
    std::filesystem::create_directories(out_dir);
    const std::string ckpt = out_dir + "/checkpoint_best.hmlt";

    const TrainResult result = train(graph, cfg, spec, ckpt);

    {
        std::ofstream log(out_dir + "/train_log.jsonl");
        if (!log) throw std::runtime_error("cannot write " + out_dir + "/train_log.jsonl");
        for (const auto& e : result.log) log << epoch_to_json(e).dump() << "\n";
    }
    std::cout << "trained " << result.log.size() << " epochs; best val ndcg@" << cfg.eval_k
              << " = " << result.best_val_ndcg << " at epoch " << result.best_epoch << "\n"
              << "checkpoint: " << ckpt << "\n";
    return 0;
}

int cmd_evaluate(const std::string& data, const std::string& checkpoint,
                 const std::string& split, std::size_t k, const std::string& activation,
                 const std::string& out_path) {
    const InteractionGraph graph = read_prepared(data);
    const ModelParams params = load_checkpoint(checkpoint);
    if (params.num_users != graph.num_users || params.num_items != graph.num_items) {
        throw std::runtime_error("checkpoint shape does not match the prepared data");
    }
    const Csr adj = build_adjacency(graph);
    const EvalSplit which = split == "val" ? EvalSplit::Val : EvalSplit::Test;
    const MetricsReport report =
        evaluate(params, graph, adj, which, k, parse_activation(activation));
    auto j = metrics_to_json(report, variant_name(params.variant),
                             std::filesystem::path(checkpoint).filename().string());
    j["split"] = split;
    emit_json(j, out_path);
    return 0;
}

int cmd_analyze(const std::string& data, const std::string& checkpoint,
                const std::string& embedding_kind, const std::string& activation,
                const std::string& out_path) {
    const InteractionGraph graph = read_prepared(data);
    const ModelParams params = load_checkpoint(checkpoint);
    if (params.num_users != graph.num_users || params.num_items != graph.num_items) {
        throw std::runtime_error("checkpoint shape does not match the prepared data");
    }
    const Csr adj = build_adjacency(graph);
    const VariantSpec spec = layer_plan(params.variant);

    ForwardOptions opts;
    opts.mode = RunMode::Eval;
    opts.phi = parse_activation(activation);
    const ForwardTrace trace = forward(adj, params, spec, opts);
    const GateDecisionLog log = extract_decisions(trace);
    const auto classes = classify_nodes(log, params.num_nodes());

    const NeighborLists unweighted = build_unweighted(graph);
    const auto pr = pagerank(unweighted);
    const auto btw = betweenness(unweighted);
    const auto cls = closeness(unweighted);

    const DenseMatrix emb = embedding_kind == "residual"
                                ? residual_mean_embedding(trace, params)
                                : gated_embedding(trace, params, kNumLayers);
    const AnalysisReport report = class_report(classes, pr, btw, cls, graph, emb);

    auto j = analysis_to_json(report);
    j["variant"] = variant_name(params.variant);
    j["embedding"] = embedding_kind;
    // Per-layer selection shares from the deterministic eval pass.
    const auto ratios = gate_linear_ratios(trace, spec);
    for (std::size_t i = 0; i < kNumLayers; ++i) {
        j["gate_ratio_table"].push_back({{"layer", i + 1},
                                         {"linear_pct", 100.0 * ratios[i]},
                                         {"nonlinear_pct", 100.0 * (1.0 - ratios[i])}});
    }
    emit_json(j, out_path);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"HMLET collaborative-filtering engine"};
    app.require_subcommand(1);

    CommonArgs common;
    app.add_option("--config", common.config_path, "key = value config file");
    app.add_option("--threads", common.threads, "worker thread count (1 = bit-reproducible)");
    auto* seed_opt = app.add_option("--seed", common.seed, "master seed");

    // prepare
    auto* prepare = app.add_subcommand("prepare", "k-core filter, split, and index raw data");
    std::string prep_data, prep_out;
    std::size_t kcore = 10;
    prepare->add_option("--data", prep_data, "raw edge-list file")->required();
    prepare->add_option("--out", prep_out, "output directory")->required();
    prepare->add_option("--kcore", kcore, "minimum surviving degree");

    // train
    auto* tr = app.add_subcommand("train", "train a model on prepared data");
    std::string train_data, train_out, variant = "End", activation = "leaky_relu";
    std::string tau_schedule = "epoch";
    TrainConfig cfg;
    tr->add_option("--data", train_data, "prepared data directory")->required();
    tr->add_option("--out", train_out, "output directory")->required();
    tr->add_option("--variant", variant,
                   "All, Front, Middle, End, forced-linear, forced-nonlinear");
    auto* o_lr = tr->add_option("--lr", cfg.learning_rate, "learning rate");
    auto* o_l2 = tr->add_option("--lambda", cfg.lambda_l2, "L2 coefficient");
    auto* o_bs = tr->add_option("--batch", cfg.batch_size, "mini-batch size");
    auto* o_dr = tr->add_option("--dropout", cfg.dropout_rate, "edge dropout rate");
    auto* o_t0 = tr->add_option("--tau0", cfg.tau0, "initial temperature");
    auto* o_tm = tr->add_option("--tau-min", cfg.tau_min, "temperature floor");
    auto* o_td = tr->add_option("--tau-decay", cfg.tau_decay, "per-epoch decay factor");
    auto* o_ep = tr->add_option("--epochs", cfg.max_epochs, "maximum epochs");
    auto* o_pa = tr->add_option("--patience", cfg.patience, "early-stop patience");
    auto* o_dim = tr->add_option("--dim", cfg.dim, "embedding dimension");
    auto* o_k = tr->add_option("--eval-k", cfg.eval_k, "validation cutoff");
    tr->add_option("--activation", activation, "leaky_relu or elu");
    tr->add_option("--tau-schedule", tau_schedule, "epoch (decay per epoch) or iter (exp decay)");
    bool mlp_hidden = false;
    tr->add_flag("--mlp-hidden", mlp_hidden, "one hidden layer in the gating networks");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "ranking metrics for a checkpoint");
    std::string eval_data, eval_ckpt, eval_split = "test", eval_out, eval_act = "leaky_relu";
    std::size_t eval_k = 20;
    ev->add_option("--data", eval_data, "prepared data directory")->required();
    ev->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    ev->add_option("--split", eval_split, "val or test")
        ->check(CLI::IsMember({"val", "test"}));
    ev->add_option("--k", eval_k, "cutoff");
    ev->add_option("--activation", eval_act, "leaky_relu or elu");
    ev->add_option("--out", eval_out, "write the JSON report here instead of stdout");

    // analyze
    auto* an = app.add_subcommand("analyze", "node classes, centralities, similarity");
    std::string an_data, an_ckpt, an_out, an_emb = "final", an_act = "leaky_relu";
    an->add_option("--data", an_data, "prepared data directory")->required();
    an->add_option("--checkpoint", an_ckpt, "checkpoint file")->required();
    an->add_option("--embedding", an_emb, "final or residual")
        ->check(CLI::IsMember({"final", "residual"}));
    an->add_option("--activation", an_act, "leaky_relu or elu");
    an->add_option("--out", an_out, "write the JSON report here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        std::map<std::string, std::string> file_cfg;
        if (!common.config_path.empty()) file_cfg = load_config_file(common.config_path);
        common.seed_from_cli = seed_opt->count() > 0;
        resolve_common(common, file_cfg);

        if (prepare->parsed()) {
            maybe_set(kcore, file_cfg, "kcore", prepare->count("--kcore") > 0);
            return cmd_prepare(prep_data, prep_out, kcore, common.seed);
        }
        if (tr->parsed()) {
            maybe_set(cfg.learning_rate, file_cfg, "learning_rate", o_lr->count() > 0);
            maybe_set(cfg.lambda_l2, file_cfg, "lambda_l2", o_l2->count() > 0);
            maybe_set(cfg.batch_size, file_cfg, "batch_size", o_bs->count() > 0);
            maybe_set(cfg.dropout_rate, file_cfg, "dropout_rate", o_dr->count() > 0);
            maybe_set(cfg.tau0, file_cfg, "tau0", o_t0->count() > 0);
            maybe_set(cfg.tau_min, file_cfg, "tau_min", o_tm->count() > 0);
            maybe_set(cfg.tau_decay, file_cfg, "tau_decay", o_td->count() > 0);
            maybe_set(cfg.max_epochs, file_cfg, "max_epochs", o_ep->count() > 0);
            maybe_set(cfg.patience, file_cfg, "patience", o_pa->count() > 0);
            maybe_set(cfg.dim, file_cfg, "D", o_dim->count() > 0);
            maybe_set(cfg.eval_k, file_cfg, "eval_k", o_k->count() > 0);
            maybe_set(variant, file_cfg, "variant", tr->count("--variant") > 0);
            maybe_set(activation, file_cfg, "activation", tr->count("--activation") > 0);
            maybe_set(tau_schedule, file_cfg, "tau_schedule", tr->count("--tau-schedule") > 0);
            cfg.seed = common.seed;
            cfg.phi = parse_activation(activation);
            cfg.mlp_hidden = mlp_hidden;
            if (tau_schedule == "iter") {
                cfg.tau_schedule = TauSchedule::IterExp;
            } else if (tau_schedule != "epoch") {
                throw ConfigError("unknown tau schedule '" + tau_schedule + "'");
            }
            return cmd_train(train_data, train_out, cfg, variant);
        }
        if (ev->parsed()) {
            return cmd_evaluate(eval_data, eval_ckpt, eval_split, eval_k, eval_act, eval_out);
        }
        if (an->parsed()) {
            return cmd_analyze(an_data, an_ckpt, an_emb, an_act, an_out);
        }
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
