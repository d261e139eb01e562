#include "uavsec/channel.hpp"

#include "uavsec/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace uavsec::channel {

void ScenarioConfig::validate() const {
    auto require = [](bool ok, const char* key) {
        if (!ok) throw ConfigError(std::string("invalid scenario value: ") + key);
    };
    require(area_side > 0.0 && std::isfinite(area_side), "area_side");
    require(users >= 1, "users");
    require(antennas >= 1, "antennas");
    require(altitude > 0.0 && std::isfinite(altitude), "altitude");
    require(!std::isnan(rician_factor_db) && rician_factor_db > -HUGE_VAL, "rician_factor_db");
    require(std::isfinite(pathloss_intercept_db), "pathloss_intercept_db");
    require(pathloss_slope_db > 0.0 && std::isfinite(pathloss_slope_db), "pathloss_slope_db");
    require(eve_distance > 0.0 && eve_distance < area_side, "eve_distance");
    require(power_budget > 0.0 && std::isfinite(power_budget), "power_budget");
    require(noise_power > 0.0 && std::isfinite(noise_power), "noise_power");
}

double ScenarioConfig::rician_factor_linear() const { return std::pow(10.0, rician_factor_db / 10.0); }

void Topology::validate() const {
    if (users.empty()) throw ContractError("topology needs at least one user");
    if (users.size() != eves.size()) throw ContractError("users and eavesdroppers must pair one-to-one");
    if (!(altitude > 0.0)) throw ContractError("altitude must be positive");
    if (!inside(uav)) throw ContractError("UAV outside the area");
    for (std::size_t k = 0; k < users.size(); ++k) {
        if (!inside(users[k]) || !inside(eves[k])) throw ContractError("ground node outside the area");
    }
}

Topology Topology::with_uav(Point p) const {
    Topology t = *this;
    t.uav = p;
    return t;
}

ChannelSet ChannelSet::permuted(const std::vector<std::size_t>& perm) const {
    if (perm.size() != size()) throw DimensionError("permutation length mismatch");
    ChannelSet out;
    out.uav = uav;
    for (std::size_t i : perm) {
        out.users.push_back(users.at(i));
        out.eves.push_back(eves.at(i));
    }
    return out;
}

Topology sample_topology(const ScenarioConfig& cfg, Rng& rng) {
    cfg.validate();
    std::uniform_real_distribution<double> coord(0.0, cfg.area_side);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    Topology t;
    t.area_side = cfg.area_side;
    t.altitude = cfg.altitude;
    t.uav = cfg.area_center();
    for (std::size_t k = 0; k < cfg.users; ++k) {
        const Point u{coord(rng), coord(rng)};
        Point e;
        do {
            const double phi = angle(rng);
            e = {u.x + cfg.eve_distance * std::cos(phi), u.y + cfg.eve_distance * std::sin(phi)};
        } while (!t.inside(e));
        t.users.push_back(u);
        t.eves.push_back(e);
    }
    return t;
}

double distance_3d(Point uav, double altitude, Point ground) {
    if (!(altitude > 0.0)) throw DomainError("altitude must be positive");
    const double dx = ground.x - uav.x;
    const double dy = ground.y - uav.y;
    return std::sqrt(dx * dx + dy * dy + altitude * altitude);
}

double path_loss_db(double distance, double intercept_db, double slope_db) {
    if (!(distance > 0.0)) throw DomainError("path loss needs a positive distance");
    return intercept_db + slope_db * std::log10(distance);
}

double path_gain(double distance, double intercept_db, double slope_db) {
    return std::pow(10.0, -path_loss_db(distance, intercept_db, slope_db) / 10.0);
}

double path_gain(double distance, const ScenarioConfig& cfg) {
    return path_gain(distance, cfg.pathloss_intercept_db, cfg.pathloss_slope_db);
}

CVector steering_vector(Point uav, double altitude, Point ground, std::size_t antennas) {
    const double d = distance_3d(uav, altitude, ground);
    const double cos_axis = (ground.x - uav.x) / d;
    CVector a(static_cast<Eigen::Index>(antennas));
    for (std::size_t n = 0; n < antennas; ++n) {
        a(static_cast<Eigen::Index>(n)) = std::polar(1.0, -std::numbers::pi * static_cast<double>(n) * cos_axis);
    }
    return a;
}

CVector draw_channel(Point uav, double altitude, Point ground, const ScenarioConfig& cfg, Rng& rng) {
    const double g = path_gain(distance_3d(uav, altitude, ground), cfg);
    const double kappa = cfg.rician_factor_linear();
    const double los_w = std::isinf(kappa) ? 1.0 : std::sqrt(kappa / (1.0 + kappa));
    const double nlos_w = std::isinf(kappa) ? 0.0 : std::sqrt(1.0 / (1.0 + kappa));
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    const CVector a = steering_vector(uav, altitude, ground, cfg.antennas);
    CVector h(a.size());
    for (Eigen::Index n = 0; n < a.size(); ++n) {
        const double re = normal(rng);
        const double im = normal(rng);
        h(n) = std::sqrt(g) * (los_w * a(n) + nlos_w * std::complex<double>(re, im));
    }
    return h;
}

ChannelSet draw_channel_set(const Topology& topo, const ScenarioConfig& cfg, Rng& rng) {
    ChannelSet cs;
    cs.uav = topo.uav;
    cs.users.reserve(topo.size());
    cs.eves.reserve(topo.size());
    for (std::size_t k = 0; k < topo.size(); ++k) {
        cs.users.push_back(draw_channel(topo.uav, topo.altitude, topo.users[k], cfg, rng));
        cs.eves.push_back(draw_channel(topo.uav, topo.altitude, topo.eves[k], cfg, rng));
    }
    return cs;
}

Point sample_uav_position(const ScenarioConfig& cfg, Rng& rng) {
    std::uniform_real_distribution<double> coord(0.0, cfg.area_side);
    const double x = coord(rng);
    return {x, coord(rng)};
}

}  // namespace uavsec::channel
