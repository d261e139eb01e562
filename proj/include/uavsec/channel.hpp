#pragma once

// Scenario geometry and air-to-ground Rician channel generation.

#include "uavsec/rng.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace uavsec::channel {

using CVector = Eigen::VectorXcd;

struct Point {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point&) const = default;
};

// Defaults reproduce the reference simulation parameters:
// 200 m x 200 m area, K = 8 user/eavesdropper pairs, N = 8 antennas,
// H = 100 m, Rician factor 10 dB, 1 W budget, noise 1.2e-13 W,
// path loss 30 + 22 log10(d) dB, eavesdroppers 20 m from their user.
struct ScenarioConfig {
    double area_side = 200.0;
    std::size_t users = 8;
    std::size_t antennas = 8;
    double altitude = 100.0;
    double rician_factor_db = 10.0;
    double pathloss_intercept_db = 30.0;
    double pathloss_slope_db = 22.0;
    double eve_distance = 20.0;
    double power_budget = 1.0;
    double noise_power = 1.2e-13;
    std::uint64_t seed = 1;

    // Throws ConfigError naming the first invalid field.
    void validate() const;
    // +inf dB maps to a pure line-of-sight channel.
    double rician_factor_linear() const;
    Point area_center() const { return {area_side / 2.0, area_side / 2.0}; }
};

struct Topology {
    double area_side = 200.0;
    Point uav;
    double altitude = 100.0;
    std::vector<Point> users;
    std::vector<Point> eves;  // eves[k] wiretaps users[k]

    std::size_t size() const { return users.size(); }
    bool inside(Point p) const { return p.x >= 0.0 && p.y >= 0.0 && p.x <= area_side && p.y <= area_side; }
    void validate() const;
    Topology with_uav(Point p) const;
};

struct ChannelSet {
    std::vector<CVector> users;  // h_k
    std::vector<CVector> eves;   // h_E,k
    Point uav;

    std::size_t size() const { return users.size(); }
    std::size_t antennas() const { return users.empty() ? 0 : static_cast<std::size_t>(users.front().size()); }
    // Reorders both user and eavesdropper channels: result[i] = this[perm[i]].
    ChannelSet permuted(const std::vector<std::size_t>& perm) const;
};

Topology sample_topology(const ScenarioConfig& cfg, Rng& rng);

double distance_3d(Point uav, double altitude, Point ground);

double path_loss_db(double distance, double intercept_db = 30.0, double slope_db = 22.0);
// Linear power gain 10^(-loss/10). Throws DomainError for d <= 0.
double path_gain(double distance, double intercept_db = 30.0, double slope_db = 22.0);
double path_gain(double distance, const ScenarioConfig& cfg);

// Half-wavelength uniform linear array along the x axis; entry n has phase
// -pi * n * cos(angle between the array axis and the UAV->node ray).
CVector steering_vector(Point uav, double altitude, Point ground, std::size_t antennas);

// h = sqrt(g) * ( sqrt(k/(1+k)) a + sqrt(1/(1+k)) u ), u ~ CN(0, I).
CVector draw_channel(Point uav, double altitude, Point ground, const ScenarioConfig& cfg, Rng& rng);

// Draws h_1, h_E,1, h_2, h_E,2, ... in that order from rng.
ChannelSet draw_channel_set(const Topology& topo, const ScenarioConfig& cfg, Rng& rng);

// Uniformly random UAV position inside the area.
Point sample_uav_position(const ScenarioConfig& cfg, Rng& rng);

}  // namespace uavsec::channel
