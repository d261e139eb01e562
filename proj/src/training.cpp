#include "uavsec/training.hpp"

#include "uavsec/errors.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

namespace uavsec {

void TrainConfig::validate() const {
    auto require = [](bool ok, const char* key) {
        if (!ok) throw ConfigError(std::string("invalid training value: ") + key);
    };
    require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate");
    require(batch_size >= 1, "batch_size");
    require(steps_per_epoch >= 1, "steps_per_epoch");
    require(momentum >= 0.0 && momentum < 1.0, "momentum");
    require(max_grad_norm >= 0.0, "max_grad_norm");
}

std::vector<channel::ChannelSet> sample_scenarios(const channel::ScenarioConfig& cfg, std::size_t count, Rng& rng) {
    std::vector<channel::ChannelSet> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        channel::Topology topo = channel::sample_topology(cfg, rng);
        topo.uav = channel::sample_uav_position(cfg, rng);
        out.push_back(channel::draw_channel_set(topo, cfg, rng));
    }
    return out;
}

std::vector<double> train_unsupervised(ad::ParameterSet& params, const EmbeddingFn& embed,
                                       const channel::ScenarioConfig& scenario, const TrainConfig& cfg,
                                       std::uint64_t seed) {
    scenario.validate();
    cfg.validate();
    Rng rng(seed);
    ad::MomentumSgd opt(cfg.learning_rate, cfg.momentum);
    std::vector<double> curve;
    curve.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double acc = 0.0;
        for (std::size_t step = 0; step < cfg.steps_per_epoch; ++step) {
            const auto sets = sample_scenarios(scenario, cfg.batch_size, rng);
            const auto batch = secrecy::make_channel_batch(sets);
            double loss_value = 0.0;
            try {
                ad::Tape tape;
                ad::Binder bind(tape, params);
                ad::Var e = embed(bind, sets);
                ad::Var loss = secrecy::secrecy_loss_real(tape, batch, e, scenario.noise_power, scenario.power_budget);
                loss_value = loss.item();
                params.zero_grad();
                tape.backward(loss);
            } catch (const DomainError& err) {
                std::ostringstream os;
                os << "training diverged at epoch " << epoch << " step " << step << ": " << err.what();
                throw TrainingError(os.str());
            } catch (const DegenerateInputError& err) {
                std::ostringstream os;
                os << "dead network at epoch " << epoch << " step " << step << ": " << err.what();
                throw TrainingError(os.str());
            }
            if (cfg.max_grad_norm > 0.0) ad::clip_grad_norm(params, cfg.max_grad_norm);
            opt.step(params);
            if (!params.all_finite()) {
                std::ostringstream os;
                os << "non-finite parameters after epoch " << epoch << " step " << step << " (loss " << loss_value << ")";
                throw TrainingError(os.str());
            }
            acc += loss_value;
        }
        curve.push_back(acc / static_cast<double>(cfg.steps_per_epoch));
    }
    return curve;
}

std::vector<double> moving_average(const std::vector<double>& values, std::size_t window) {
    std::vector<double> out;
    if (window == 0 || values.size() < window) return out;
    double acc = std::accumulate(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(window), 0.0);
    out.push_back(acc / static_cast<double>(window));
    for (std::size_t i = window; i < values.size(); ++i) {
        acc += values[i] - values[i - window];
        out.push_back(acc / static_cast<double>(window));
    }
    return out;
}

}  // namespace uavsec
