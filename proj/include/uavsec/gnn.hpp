#pragma once

// Graph-neural beamformer. Every user/eavesdropper pair is a node with
// feature [Re h_k, Im h_k, Re h_E,k, Im h_E,k, Re e_k, Im e_k]; only the
// embedding block e_k changes between layers. Each layer shares its
// parameters across nodes:
//
//   m_k = gen(z_k)                                   (affine)
//   a_k = max_{l != k} PReLU(aggr(m_l))              (zero when K = 1)
//   e_k = out2(PReLU(out1([m_k, a_k])))              (width 2N)
//
// The final embeddings are power-normalized into the beamformer.

#include "uavsec/channel.hpp"
#include "uavsec/layers.hpp"
#include "uavsec/rng.hpp"
#include "uavsec/secrecy.hpp"
#include "uavsec/training.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace uavsec::gnn {

using channel::ChannelSet;
using channel::CVector;
using secrecy::Beamformer;

struct GnnArchitecture {
    std::size_t antennas = 8;
    std::size_t layers = 5;
    std::size_t message_width = 32;
    std::size_t aggregation_width = 32;
    std::size_t hidden_width = 64;

    // Widths 4N / 4N / 8N.
    static GnnArchitecture for_antennas(std::size_t antennas, std::size_t layers = 5);
    bool operator==(const GnnArchitecture&) const = default;
};

struct GnnModel {
    GnnArchitecture arch;
    // Channel entries are multiplied by this before entering the network.
    double feature_scale = 1.0;
    ad::ParameterSet params;
    std::uint64_t seed = 0;
    std::string config_hash;

    static GnnModel create(const GnnArchitecture& arch, double feature_scale, std::uint64_t seed);
};

// 1 / sqrt(path gain at the UAV altitude): brings channel entries to O(1).
double channel_feature_scale(const channel::ScenarioConfig& cfg);

// e_k = h_k / ||h_k||. Throws DegenerateInputError on a zero channel.
std::vector<CVector> init_embeddings(const ChannelSet& channels);

struct GraphInputs {
    std::size_t batch = 0;
    std::size_t users = 0;
    ad::Matrix channel_features;  // B*K x 4N, scaled
    ad::Matrix embeddings;        // B*K x 2N, initial embeddings
};

GraphInputs make_graph_inputs(const std::vector<ChannelSet>& sets, double feature_scale);

// One message-passing layer; returns the new B*K x 2N embedding rows.
ad::Var gcn_layer(ad::Binder& bind, const GnnArchitecture& arch, std::size_t layer, ad::Var channel_features,
                  ad::Var embeddings, std::size_t users);

// All layers; final B*K x 2N embedding rows (before normalization).
ad::Var gnn_embeddings(ad::Binder& bind, const GnnModel& model, const GraphInputs& inputs);

Beamformer gnn_forward(const ChannelSet& channels, const GnnModel& model, double pmax);
std::vector<Beamformer> gnn_forward_batch(const std::vector<ChannelSet>& sets, const GnnModel& model, double pmax);

// Multiply-add count of one forward pass, as recorded by the tape.
std::uint64_t forward_multiply_adds(const GnnModel& model, std::size_t users);

struct GnnTrainResult {
    GnnModel model;
    std::vector<double> loss_curve;
};

GnnTrainResult train_gnn(const channel::ScenarioConfig& scenario, const TrainConfig& cfg, std::uint64_t seed,
                         std::size_t layers = 5);

// Fine-tunes a copy of `pretrained` on `scenario` (which may change K, not N).
GnnTrainResult transfer_train(const GnnModel& pretrained, const channel::ScenarioConfig& scenario,
                              const TrainConfig& cfg, std::uint64_t seed);

// Mean loss (-mean sum secrecy rate) of a model over `count` fresh scenarios.
double evaluate_loss(const GnnModel& model, const channel::ScenarioConfig& scenario, std::size_t count,
                     std::uint64_t seed);

}  // namespace uavsec::gnn
