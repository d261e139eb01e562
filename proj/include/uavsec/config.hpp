#pragma once

// Run configuration: scenario, GNN training, SAC and evaluation settings in
// one JSON document. Every section is optional; missing keys keep their
// defaults and unknown keys are rejected with a ConfigError naming the key.
//
// {
//   "seed": 7, "out_dir": "out", "experiment": "all",
//   "scenario": { "area_side": 200, "users": 8, "antennas": 8, ... },
//   "gnn":      { "learning_rate": 0.005, "epochs": 100, "batch_size": 128, "layers": 5, ... },
//   "sac":      { "learning_rate": 0.0003, "episodes": 200, "optimizer": "adam", ... },
//   "eval":     { "scenarios": 200, "power_factors": [0.25, 0.5, 1, 2, 4], ... }
// }

#include "uavsec/channel.hpp"
#include "uavsec/sac.hpp"
#include "uavsec/training.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace uavsec {

struct EvalConfig {
    std::size_t scenarios = 200;
    std::vector<std::size_t> user_counts{4, 6, 8, 10, 12};
    std::vector<double> power_factors{0.25, 0.5, 1.0, 2.0, 4.0};
    std::vector<double> noise_factors{0.25, 0.5, 1.0, 2.0, 4.0};
    // Train a fresh MLP for every K the sweep visits instead of reporting retrain-required.
    bool retrain_mlp = false;
    std::vector<std::size_t> cdf_users{8, 12};
    std::size_t grid_resolution = 25;
    std::size_t topologies = 3;
    std::size_t repeats = 400;
    std::vector<std::size_t> bench_users{8, 12};

    void validate() const;
};

struct RunConfig {
    channel::ScenarioConfig scenario;
    TrainConfig gnn;
    std::size_t gnn_layers = 5;
    sac::SacConfig sac;
    EvalConfig eval;
    std::string experiment = "all";
    std::string out_dir = "out";
    std::uint64_t seed = 7;

    void validate() const;
};

// Desk-scale defaults (GNN 100 epochs x batch 128, SAC 200 episodes).
RunConfig default_run_config();
// Full reference budget: SAC 500 episodes.
RunConfig full_run_config();

RunConfig run_config_from_json_text(const std::string& text);
std::string run_config_to_json_text(const RunConfig& cfg);
// "default" and "full" select the built-in configurations; anything else is a file path.
RunConfig load_run_config(const std::string& path_or_name);

// FNV-1a 64 of the canonical JSON text without out_dir, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

}  // namespace uavsec
