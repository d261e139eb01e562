#include "uavsec/gnn.hpp"

#include "uavsec/errors.hpp"

#include <cmath>
#include <string>

namespace uavsec::gnn {

using ad::Var;
using Eigen::Index;

GnnArchitecture GnnArchitecture::for_antennas(std::size_t antennas, std::size_t layers) {
    return {antennas, layers, 4 * antennas, 4 * antennas, 8 * antennas};
}

namespace {

std::string layer_name(std::size_t layer, const char* part) { return "layer" + std::to_string(layer) + "." + part; }

}  // namespace

GnnModel GnnModel::create(const GnnArchitecture& arch, double feature_scale, std::uint64_t seed) {
    if (arch.antennas == 0 || arch.layers == 0) throw ContractError("GNN needs N >= 1 and D >= 1");
    GnnModel m;
    m.arch = arch;
    m.feature_scale = feature_scale;
    m.seed = seed;
    Rng rng(derive_seed(seed, 0x6e6e));
    const std::size_t n2 = 2 * arch.antennas;
    for (std::size_t d = 0; d < arch.layers; ++d) {
        ad::add_affine(m.params, layer_name(d, "gen"), 3 * n2, arch.message_width, rng);
        ad::add_affine(m.params, layer_name(d, "aggr"), arch.message_width, arch.aggregation_width, rng);
        ad::add_prelu(m.params, layer_name(d, "aggr_act"));
        ad::add_affine(m.params, layer_name(d, "out1"), arch.message_width + arch.aggregation_width, arch.hidden_width, rng);
        ad::add_prelu(m.params, layer_name(d, "out_act"));
        ad::add_affine(m.params, layer_name(d, "out2"), arch.hidden_width, n2, rng);
    }
    return m;
}

double channel_feature_scale(const channel::ScenarioConfig& cfg) {
    return 1.0 / std::sqrt(channel::path_gain(cfg.altitude, cfg));
}

std::vector<CVector> init_embeddings(const ChannelSet& channels) {
    std::vector<CVector> out;
    out.reserve(channels.size());
    for (const auto& h : channels.users) {
        const double n = h.norm();
        if (!(n > 0.0)) throw DegenerateInputError("zero user channel has no matched-filter direction");
        out.push_back(h / n);
    }
    return out;
}

GraphInputs make_graph_inputs(const std::vector<ChannelSet>& sets, double feature_scale) {
    if (sets.empty()) throw DimensionError("empty graph batch");
    GraphInputs in;
    in.batch = sets.size();
    in.users = sets.front().size();
    const auto n = static_cast<Index>(sets.front().antennas());
    const auto rows = static_cast<Index>(in.batch * in.users);
    in.channel_features.resize(rows, 4 * n);
    in.embeddings.resize(rows, 2 * n);
    Index r = 0;
    for (const auto& s : sets) {
        if (s.size() != in.users || static_cast<Index>(s.antennas()) != n) {
            throw DimensionError("graph batch members must share K and N");
        }
        const auto e0 = init_embeddings(s);
        for (std::size_t k = 0; k < s.size(); ++k, ++r) {
            in.channel_features.row(r).leftCols(2 * n) = secrecy::to_real_row(s.users[k]) * feature_scale;
            in.channel_features.row(r).rightCols(2 * n) = secrecy::to_real_row(s.eves[k]) * feature_scale;
            in.embeddings.row(r) = secrecy::to_real_row(e0[k]);
        }
    }
    return in;
}

Var gcn_layer(ad::Binder& bind, const GnnArchitecture& arch, std::size_t layer, Var channel_features, Var embeddings,
              std::size_t users) {
    if (channel_features.cols() != 4 * arch.antennas || embeddings.cols() != 2 * arch.antennas) {
        throw DimensionError("node features do not match the model antenna count");
    }
    Var z = ad::concat({channel_features, embeddings}, 1);
    Var msg = ad::affine(bind, layer_name(layer, "gen"), z);
    Var transformed = ad::prelu(bind, layer_name(layer, "aggr_act"), ad::affine(bind, layer_name(layer, "aggr"), msg));
    Var agg = ad::max_over_neighbors(transformed, users);
    Var combined = ad::concat({msg, agg}, 1);
    Var hidden = ad::prelu(bind, layer_name(layer, "out_act"), ad::affine(bind, layer_name(layer, "out1"), combined));
    return ad::affine(bind, layer_name(layer, "out2"), hidden);
}

Var gnn_embeddings(ad::Binder& bind, const GnnModel& model, const GraphInputs& inputs) {
    if (inputs.channel_features.cols() != static_cast<Index>(4 * model.arch.antennas)) {
        throw DimensionError("model built for N=" + std::to_string(model.arch.antennas) + " got channels of another length");
    }
    ad::Tape& tape = bind.tape();
    Var features = tape.constant(ad::Tensor(inputs.channel_features));
    Var e = tape.constant(ad::Tensor(inputs.embeddings));
    for (std::size_t d = 0; d < model.arch.layers; ++d) {
        e = gcn_layer(bind, model.arch, d, features, e, inputs.users);
    }
    return e;
}

std::vector<Beamformer> gnn_forward_batch(const std::vector<ChannelSet>& sets, const GnnModel& model, double pmax) {
    const GraphInputs in = make_graph_inputs(sets, model.feature_scale);
    ad::Tape tape;
    ad::Binder bind(tape, static_cast<const ad::ParameterSet&>(model.params));
    Var w = secrecy::normalize_power_real(gnn_embeddings(bind, model, in), in.users, pmax);
    std::vector<Beamformer> out;
    out.reserve(in.batch);
    for (std::size_t b = 0; b < in.batch; ++b) out.push_back(secrecy::beamformer_from_rows(w.value(), b, in.users));
    return out;
}

Beamformer gnn_forward(const ChannelSet& channels, const GnnModel& model, double pmax) {
    return gnn_forward_batch({channels}, model, pmax).front();
}

std::uint64_t forward_multiply_adds(const GnnModel& model, std::size_t users) {
    channel::ScenarioConfig cfg;
    cfg.users = users;
    cfg.antennas = model.arch.antennas;
    Rng rng(derive_seed(model.seed, 0xc0));
    const auto sets = sample_scenarios(cfg, 1, rng);
    const GraphInputs in = make_graph_inputs(sets, model.feature_scale);
    ad::Tape tape;
    ad::Binder bind(tape, static_cast<const ad::ParameterSet&>(model.params));
    gnn_embeddings(bind, model, in);
    return tape.multiply_adds();
}

namespace {

EmbeddingFn embedding_fn(const GnnModel& model) {
    return [&model](ad::Binder& bind, const std::vector<ChannelSet>& sets) {
        return gnn_embeddings(bind, model, make_graph_inputs(sets, model.feature_scale));
    };
}

}  // namespace

GnnTrainResult train_gnn(const channel::ScenarioConfig& scenario, const TrainConfig& cfg, std::uint64_t seed,
                         std::size_t layers) {
    GnnTrainResult r{GnnModel::create(GnnArchitecture::for_antennas(scenario.antennas, layers),
                                      channel_feature_scale(scenario), seed),
                     {}};
    r.loss_curve = train_unsupervised(r.model.params, embedding_fn(r.model), scenario, cfg, derive_seed(seed, 1));
    return r;
}

GnnTrainResult transfer_train(const GnnModel& pretrained, const channel::ScenarioConfig& scenario,
                              const TrainConfig& cfg, std::uint64_t seed) {
    if (pretrained.arch.antennas != scenario.antennas) {
        throw DimensionError("transfer requires the same antenna count");
    }
    GnnTrainResult r{pretrained, {}};
    if (cfg.epochs > 0) {
        r.loss_curve = train_unsupervised(r.model.params, embedding_fn(r.model), scenario, cfg, derive_seed(seed, 1));
    }
    return r;
}

double evaluate_loss(const GnnModel& model, const channel::ScenarioConfig& scenario, std::size_t count,
                     std::uint64_t seed) {
    Rng rng(seed);
    const auto sets = sample_scenarios(scenario, count, rng);
    const auto bfs = gnn_forward_batch(sets, model, scenario.power_budget);
    double acc = 0.0;
    for (std::size_t i = 0; i < sets.size(); ++i) acc += secrecy::secrecy_report(sets[i], bfs[i], scenario.noise_power).sum;
    return -acc / static_cast<double>(count);
}

}  // namespace uavsec::gnn
