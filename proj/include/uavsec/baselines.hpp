#pragma once

#include "uavsec/deployment.hpp"
#include "uavsec/secrecy.hpp"
#include "uavsec/training.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace uavsec::baselines {

using channel::ChannelSet;
using channel::Point;
using channel::Topology;
using secrecy::Beamformer;

// w_k = sqrt(pmax / K) h_k / ||h_k||
Beamformer mrt_beamformer(const ChannelSet& channels, double pmax);

// Fully connected beamformer for one fixed (K, N): flattened scaled channels
// (4KN) -> 8KN -> 8KN -> 2KN embeddings, PReLU between layers.
struct MlpModel {
    std::size_t users = 0;
    std::size_t antennas = 0;
    std::size_t hidden_width = 0;
    double feature_scale = 1.0;
    ad::ParameterSet params;
    std::uint64_t seed = 0;
    std::string config_hash;

    static MlpModel create(std::size_t users, std::size_t antennas, double feature_scale, std::uint64_t seed);
};

// B x 4KN input rows: per sample [Re h_1, Im h_1, ..., Re h_E,K, Im h_E,K] * scale.
ad::Matrix mlp_inputs(const std::vector<ChannelSet>& sets, double feature_scale);
// B*K x 2N embedding rows. Throws DimensionError on a (K, N) mismatch.
ad::Var mlp_embeddings(ad::Binder& bind, const MlpModel& model, const std::vector<ChannelSet>& sets);

Beamformer mlp_forward(const ChannelSet& channels, const MlpModel& model, double pmax);
std::vector<Beamformer> mlp_forward_batch(const std::vector<ChannelSet>& sets, const MlpModel& model, double pmax);

struct MlpTrainResult {
    MlpModel model;
    std::vector<double> loss_curve;
};

MlpTrainResult train_mlp(const channel::ScenarioConfig& scenario, const TrainConfig& cfg, std::uint64_t seed);

// ---- deployment heuristics -----------------------------------------------------

struct LabeledPosition {
    std::string label;
    Point position;
};

struct Circle {
    Point center;
    double radius = 0.0;
};

// Smallest circle containing every point (exhaustive over 2- and 3-point
// boundary sets; meant for the small user counts used here).
Circle min_enclosing_circle(const std::vector<Point>& points);
// Counter-clockwise hull without collinear points.
std::vector<Point> convex_hull(std::vector<Point> points);
// Area centroid of the hull; falls back to the mean for degenerate hulls.
Point polygon_centroid(const std::vector<Point>& points);
Point mean_position(const std::vector<Point>& points);

// area_center, geometric_center, circumcenter, polygon_centroid (users only).
std::array<LabeledPosition, 4> heuristic_positions(const Topology& topo);

struct GridResult {
    Point best_position;
    double best_reward = 0.0;
    std::size_t resolution = 0;
    std::vector<double> rewards;  // index iy * G + ix
};

// Cell centres ((i + 0.5) L / G); for odd G the area centre is a grid point.
std::vector<Point> grid_points(double area_side, std::size_t resolution);
Point snap_to_grid(Point p, double area_side, std::size_t resolution);

GridResult grid_search_deployment(const Topology& topo, const channel::ScenarioConfig& cfg, const gnn::GnnModel& gnn,
                                  const std::vector<std::uint64_t>& fading_seeds, std::size_t resolution = 25);

}  // namespace uavsec::baselines
