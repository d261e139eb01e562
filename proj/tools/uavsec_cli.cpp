#include "uavsec/checkpoint.hpp"
#include "uavsec/config.hpp"
#include "uavsec/errors.hpp"
#include "uavsec/experiments.hpp"

#include <CLI11.hpp>

#include <malloc.h>

#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace uavsec;

namespace {

struct Options {
    std::string config = "default";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> checkpoint;
    std::optional<std::string> mlp_checkpoint;
    std::optional<std::size_t> users;
    std::optional<std::size_t> grid;
    std::optional<std::size_t> repeats;
};

RunConfig resolve(const Options& o) {
    RunConfig cfg = load_run_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (o.out) cfg.out_dir = *o.out;
    if (o.grid) cfg.eval.grid_resolution = *o.grid;
    if (o.repeats) cfg.eval.repeats = *o.repeats;
    cfg.validate();
    return cfg;
}

gnn::GnnModel require_gnn(const Options& o, const std::string& cmd) {
    if (!o.checkpoint) throw CheckpointError(cmd + " needs --checkpoint pointing at a GNN checkpoint");
    return io::load_gnn(*o.checkpoint);
}

std::optional<baselines::MlpModel> optional_mlp(const Options& o) {
    if (!o.mlp_checkpoint) return std::nullopt;
    return io::load_mlp(*o.mlp_checkpoint);
}

std::vector<std::string> checkpoint_lines(const Options& o) {
    std::vector<std::string> lines;
    if (o.checkpoint) lines.push_back("checkpoint: " + *o.checkpoint);
    if (o.mlp_checkpoint) lines.push_back("mlp_checkpoint: " + *o.mlp_checkpoint);
    return lines;
}

int run(const std::string& cmd, const Options& o) {
    RunConfig cfg = resolve(o);
    if (o.users && cmd != "transfer") cfg.scenario.users = *o.users;
    const fs::path out = cfg.out_dir;
    fs::create_directories(out);
    std::vector<std::string> extra = checkpoint_lines(o);
    const std::string hash = config_hash(cfg);

    if (cmd == "train-gnn") {
        auto r = gnn::train_gnn(cfg.scenario, cfg.gnn, cfg.seed, cfg.gnn_layers);
        r.model.config_hash = hash;
        exp::loss_curve_table(r.loss_curve).write_csv(out / "loss_curve.csv");
        io::save_gnn(r.model, out / "gnn.json");
        std::cout << "final loss " << exp::format_number(r.loss_curve.empty() ? 0.0 : r.loss_curve.back()) << "\n";
    } else if (cmd == "train-mlp") {
        auto r = baselines::train_mlp(cfg.scenario, cfg.gnn, cfg.seed);
        r.model.config_hash = hash;
        exp::loss_curve_table(r.loss_curve).write_csv(out / "loss_curve.csv");
        io::save_mlp(r.model, out / "mlp.json");
        std::cout << "final loss " << exp::format_number(r.loss_curve.empty() ? 0.0 : r.loss_curve.back()) << "\n";
    } else if (cmd == "train-sac") {
        const auto g = require_gnn(o, cmd);
        const auto dc = exp::deployment_cases(cfg).front();
        auto r = sac::train_sac(dc.topology, cfg.scenario, cfg.sac, g, dc.fading_seeds, cfg.seed);
        exp::sac_curve_table(r.episodes).write_csv(out / "sac_curve.csv");
        exp::trace_table(r.trace).write_csv(out / "trace.csv");
        io::save_sac(r.model, out / "sac.json");
        std::cout << "final position (" << r.final_position.x << ", " << r.final_position.y << ") reward "
                  << exp::format_number(r.final_reward) << "\n";
    } else if (cmd == "eval") {
        const auto g = require_gnn(o, cmd);
        const auto m = optional_mlp(o);
        const auto t = exp::run_eval(cfg, g, m ? &*m : nullptr);
        t.write_csv(out / "eval.csv");
        std::cout << t.to_csv();
    } else if (cmd == "sweep-users" || cmd == "sweep-power" || cmd == "sweep-noise") {
        const auto g = require_gnn(o, cmd);
        const auto m = optional_mlp(o);
        const auto kind = exp::parse_sweep_kind(cmd.substr(6));
        const auto t = exp::run_sweep(kind, cfg, g, m ? &*m : nullptr);
        t.write_csv(out / ("sweep_" + exp::sweep_name(kind) + ".csv"));
        std::cout << t.to_csv();
    } else if (cmd == "cdf") {
        const auto g = require_gnn(o, cmd);
        const auto m = optional_mlp(o);
        exp::run_cdf(cfg, g, m ? &*m : nullptr).write_csv(out / "cdf.csv");
    } else if (cmd == "deploy-compare") {
        const auto g = require_gnn(o, cmd);
        auto table = exp::deploy_compare_table();
        const auto cases = exp::deployment_cases(cfg);
        for (std::size_t i = 0; i < cases.size(); ++i) {
            const auto outcome = exp::run_deploy_case(cases[i], cfg, g, derive_seed(cfg.seed, i));
            exp::append_deploy_rows(table, i, cases[i], outcome, cfg.scenario, g);
            exp::trace_table(outcome.sac.trace).write_csv(out / ("trace_" + std::to_string(i) + ".csv"));
            std::cout << "topology " << i << " done\n";
        }
        table.write_csv(out / "deploy_compare.csv");
        std::cout << table.to_csv();
    } else if (cmd == "bench") {
        const auto g = require_gnn(o, cmd);
        const auto m = optional_mlp(o);
        const auto t = exp::bench_inference(cfg, g, m ? &*m : nullptr, cfg.eval.repeats);
        t.write_csv(out / "bench.csv");
        std::cout << t.to_csv();
    } else if (cmd == "transfer") {
        const auto g = require_gnn(o, cmd);
        const std::size_t k = o.users.value_or(12);
        const auto r = exp::run_transfer(cfg, g, k, cfg.seed);
        exp::transfer_table(r).write_csv(out / "transfer_curve.csv");
        extra.push_back("transfer_users: " + std::to_string(k));
        extra.push_back("scratch_final_smoothed_loss: " + exp::format_number(r.scratch_final_smoothed));
        extra.push_back("transfer_epochs_to_reach: " + std::to_string(r.epochs_to_reach));
        std::cout << "transfer reaches the scratch final loss after " << r.epochs_to_reach << " of "
                  << r.scratch_loss.size() << " epochs\n";
    }
    exp::write_manifest(out, cfg, cmd, extra);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);

    CLI::App app{"UAV secrecy beamforming and deployment experiments"};
    app.require_subcommand(1);
    Options o;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"train-gnn", "Train the GNN beamformer"},
        {"train-mlp", "Train the MLP baseline"},
        {"train-sac", "Train the SAC deployment agent on a fixed topology"},
        {"eval", "Mean sum secrecy rate of GNN, MLP and MRT on held-out scenarios"},
        {"sweep-users", "Secrecy rate versus user count"},
        {"sweep-power", "Secrecy rate versus transmit power"},
        {"sweep-noise", "Secrecy rate versus noise power"},
        {"cdf", "Per-user secrecy-rate CDFs"},
        {"deploy-compare", "SAC, grid oracle and heuristic placements"},
        {"bench", "Inference timing"},
        {"transfer", "Fine-tune a checkpoint at a new user count against training from scratch"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", o.config, "Config file, or 'default' / 'full'");
        sub->add_option("--seed", o.seed, "Master seed");
        sub->add_option("--out", o.out, "Output directory");
        sub->add_option("--checkpoint", o.checkpoint, "GNN checkpoint");
        sub->add_option("--mlp-checkpoint", o.mlp_checkpoint, "MLP checkpoint");
        sub->add_option("--users", o.users, "User count K");
        sub->add_option("--grid", o.grid, "Grid resolution G");
        sub->add_option("--repeats", o.repeats, "Timing repeats");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        return run(cmd, o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
