#pragma once

// UAV deployment environment: state encoding, movement, and the secrecy-rate
// reward evaluated through a frozen GNN beamformer.

#include "uavsec/channel.hpp"
#include "uavsec/gnn.hpp"

#include <cstdint>
#include <vector>

namespace uavsec::deploy {

using channel::ChannelSet;
using channel::Point;
using channel::ScenarioConfig;
using channel::Topology;

struct Action {
    double dx = 0.0;
    double dy = 0.0;
};

// Layout: [x/L, y/L, (Re h_k, Im h_k) for k = 1..K, (Re h_E,k, Im h_E,k) for k = 1..K],
// channel entries multiplied by 1/sqrt(path gain at the altitude).
// Dimension 2 + 4KN.
ad::Matrix encode_state(const Topology& topo, const ChannelSet& channels, const ScenarioConfig& cfg);
std::size_t state_dim(std::size_t users, std::size_t antennas);

// uav <- clip(uav + step_scale * a, area)
Topology apply_action(const Topology& topo, Action a, double step_scale);

// Fading realisations at the current UAV position, one per seed. A fixed seed
// reproduces the same small-scale draw at every position.
std::vector<ChannelSet> fading_channels(const Topology& topo, const ScenarioConfig& cfg,
                                        const std::vector<std::uint64_t>& fading_seeds);

struct RewardSample {
    double reward = 0.0;            // mean sum secrecy rate over the fading draws
    std::vector<ChannelSet> draws;  // the realisations used
};

RewardSample evaluate_position(const Topology& topo, const ScenarioConfig& cfg, const gnn::GnnModel& gnn,
                               const std::vector<std::uint64_t>& fading_seeds);
double compute_reward(const Topology& topo, const ScenarioConfig& cfg, const gnn::GnnModel& gnn,
                      const std::vector<std::uint64_t>& fading_seeds);

// F seeds derived from (master, stream).
std::vector<std::uint64_t> fading_seed_set(std::uint64_t master, std::uint64_t stream, std::size_t draws);

}  // namespace uavsec::deploy
