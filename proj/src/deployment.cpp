#include "uavsec/deployment.hpp"

#include "uavsec/errors.hpp"
#include "uavsec/secrecy.hpp"

#include <algorithm>

namespace uavsec::deploy {

using Eigen::Index;

std::size_t state_dim(std::size_t users, std::size_t antennas) { return 2 + 4 * users * antennas; }

ad::Matrix encode_state(const Topology& topo, const ChannelSet& channels, const ScenarioConfig& cfg) {
    const std::size_t k = channels.size();
    const auto n = static_cast<Index>(channels.antennas());
    if (k != topo.size()) throw DimensionError("channel set does not match topology");
    const double scale = gnn::channel_feature_scale(cfg);
    ad::Matrix s(1, static_cast<Index>(state_dim(k, static_cast<std::size_t>(n))));
    s(0, 0) = topo.uav.x / topo.area_side;
    s(0, 1) = topo.uav.y / topo.area_side;
    Index off = 2;
    for (const auto* group : {&channels.users, &channels.eves}) {
        for (const auto& h : *group) {
            s.block(0, off, 1, 2 * n) = secrecy::to_real_row(h) * scale;
            off += 2 * n;
        }
    }
    return s;
}

Topology apply_action(const Topology& topo, Action a, double step_scale) {
    if (!(step_scale > 0.0)) throw DomainError("step scale must be positive");
    Topology t = topo;
    t.uav.x = std::clamp(topo.uav.x + step_scale * a.dx, 0.0, topo.area_side);
    t.uav.y = std::clamp(topo.uav.y + step_scale * a.dy, 0.0, topo.area_side);
    return t;
}

std::vector<ChannelSet> fading_channels(const Topology& topo, const ScenarioConfig& cfg,
                                        const std::vector<std::uint64_t>& fading_seeds) {
    std::vector<ChannelSet> out;
    out.reserve(fading_seeds.size());
    for (std::uint64_t seed : fading_seeds) {
        Rng rng(seed);
        out.push_back(channel::draw_channel_set(topo, cfg, rng));
    }
    return out;
}

RewardSample evaluate_position(const Topology& topo, const ScenarioConfig& cfg, const gnn::GnnModel& gnn,
                               const std::vector<std::uint64_t>& fading_seeds) {
    if (fading_seeds.empty()) throw ContractError("reward needs at least one fading draw");
    RewardSample r;
    r.draws = fading_channels(topo, cfg, fading_seeds);
    const auto bfs = gnn::gnn_forward_batch(r.draws, gnn, cfg.power_budget);
    for (std::size_t i = 0; i < r.draws.size(); ++i) {
        r.reward += secrecy::secrecy_report(r.draws[i], bfs[i], cfg.noise_power).sum;
    }
    r.reward /= static_cast<double>(r.draws.size());
    return r;
}

double compute_reward(const Topology& topo, const ScenarioConfig& cfg, const gnn::GnnModel& gnn,
                      const std::vector<std::uint64_t>& fading_seeds) {
    return evaluate_position(topo, cfg, gnn, fading_seeds).reward;
}

std::vector<std::uint64_t> fading_seed_set(std::uint64_t master, std::uint64_t stream, std::size_t draws) {
    std::vector<std::uint64_t> seeds;
    const std::uint64_t base = derive_seed(master, stream);
    for (std::size_t f = 0; f < draws; ++f) seeds.push_back(derive_seed(base, f));
    return seeds;
}

}  // namespace uavsec::deploy
