#pragma once

// Unsupervised training of beamforming networks on the negative sum secrecy
// rate. Each step samples a fresh minibatch of scenarios (random topology,
// random UAV position, fresh fading), so the loss estimates -E[R_sec].

#include "uavsec/channel.hpp"
#include "uavsec/layers.hpp"
#include "uavsec/secrecy.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace uavsec {

struct TrainConfig {
    double learning_rate = 0.005;
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    std::size_t steps_per_epoch = 10;
    double momentum = 0.0;
    // 0 disables clipping.
    double max_grad_norm = 0.0;

    void validate() const;
};

// Maps a minibatch of channel sets to B*K x 2N embedding rows on the binder's tape.
using EmbeddingFn = std::function<ad::Var(ad::Binder&, const std::vector<channel::ChannelSet>&)>;

std::vector<channel::ChannelSet> sample_scenarios(const channel::ScenarioConfig& cfg, std::size_t count, Rng& rng);

// Returns the mean loss of every epoch. Throws TrainingError on a non-finite
// loss or parameters.
std::vector<double> train_unsupervised(ad::ParameterSet& params, const EmbeddingFn& embed,
                                       const channel::ScenarioConfig& scenario, const TrainConfig& cfg,
                                       std::uint64_t seed);

// Mean of each window of `window` consecutive values (length n - window + 1).
std::vector<double> moving_average(const std::vector<double>& values, std::size_t window);

}  // namespace uavsec
