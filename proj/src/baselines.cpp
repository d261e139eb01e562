#include "uavsec/baselines.hpp"

#include "uavsec/errors.hpp"
#include "uavsec/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace uavsec::baselines {

using ad::Matrix;
using ad::Var;
using Eigen::Index;

Beamformer mrt_beamformer(const ChannelSet& channels, double pmax) {
    if (!(pmax > 0.0)) throw DomainError("power budget must be positive");
    Beamformer b;
    const double per_user = std::sqrt(pmax / static_cast<double>(channels.size()));
    for (const auto& h : channels.users) {
        const double n = h.norm();
        if (!(n > 0.0)) throw DegenerateInputError("MRT undefined for a zero channel");
        b.vectors.push_back(h * (per_user / n));
    }
    return b;
}

// ---- MLP -----------------------------------------------------------------------

MlpModel MlpModel::create(std::size_t users, std::size_t antennas, double feature_scale, std::uint64_t seed) {
    MlpModel m;
    m.users = users;
    m.antennas = antennas;
    m.hidden_width = 8 * users * antennas;
    m.feature_scale = feature_scale;
    m.seed = seed;
    Rng rng(derive_seed(seed, 0x313));
    const std::size_t in = 4 * users * antennas;
    ad::add_affine(m.params, "fc1", in, m.hidden_width, rng);
    ad::add_prelu(m.params, "act1");
    ad::add_affine(m.params, "fc2", m.hidden_width, m.hidden_width, rng);
    ad::add_prelu(m.params, "act2");
    ad::add_affine(m.params, "out", m.hidden_width, 2 * users * antennas, rng);
    return m;
}

Matrix mlp_inputs(const std::vector<ChannelSet>& sets, double feature_scale) {
    if (sets.empty()) throw DimensionError("empty MLP batch");
    const std::size_t k = sets.front().size();
    const auto n = static_cast<Index>(sets.front().antennas());
    Matrix x(static_cast<Index>(sets.size()), static_cast<Index>(4 * k) * n);
    for (std::size_t b = 0; b < sets.size(); ++b) {
        const auto& s = sets[b];
        if (s.size() != k || static_cast<Index>(s.antennas()) != n) throw DimensionError("MLP batch members must share K and N");
        Index off = 0;
        for (const auto* group : {&s.users, &s.eves}) {
            for (const auto& h : *group) {
                x.block(static_cast<Index>(b), off, 1, 2 * n) = secrecy::to_real_row(h) * feature_scale;
                off += 2 * n;
            }
        }
    }
    return x;
}

Var mlp_embeddings(ad::Binder& bind, const MlpModel& model, const std::vector<ChannelSet>& sets) {
    if (sets.empty()) throw DimensionError("empty MLP batch");
    if (sets.front().size() != model.users || sets.front().antennas() != model.antennas) {
        throw DimensionError("MLP built for K=" + std::to_string(model.users) + ", N=" + std::to_string(model.antennas) +
                             " cannot take K=" + std::to_string(sets.front().size()) +
                             ", N=" + std::to_string(sets.front().antennas()));
    }
    ad::Tape& tape = bind.tape();
    Var x = tape.constant(ad::Tensor(mlp_inputs(sets, model.feature_scale)));
    Var h = ad::prelu(bind, "act1", ad::affine(bind, "fc1", x));
    h = ad::prelu(bind, "act2", ad::affine(bind, "fc2", h));
    Var out = ad::affine(bind, "out", h);  // B x 2KN
    const std::size_t n2 = 2 * model.antennas;
    const std::size_t batch = sets.size();
    std::vector<Var> per_user;
    for (std::size_t k = 0; k < model.users; ++k) per_user.push_back(ad::slice_cols(out, k * n2, (k + 1) * n2));
    Var stacked = ad::concat(per_user, 0);  // row k*B + b
    std::vector<std::size_t> order;
    order.reserve(batch * model.users);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t k = 0; k < model.users; ++k) order.push_back(k * batch + b);
    return ad::gather_rows(stacked, order);
}

std::vector<Beamformer> mlp_forward_batch(const std::vector<ChannelSet>& sets, const MlpModel& model, double pmax) {
    ad::Tape tape;
    ad::Binder bind(tape, static_cast<const ad::ParameterSet&>(model.params));
    Var w = secrecy::normalize_power_real(mlp_embeddings(bind, model, sets), model.users, pmax);
    std::vector<Beamformer> out;
    for (std::size_t b = 0; b < sets.size(); ++b) out.push_back(secrecy::beamformer_from_rows(w.value(), b, model.users));
    return out;
}

Beamformer mlp_forward(const ChannelSet& channels, const MlpModel& model, double pmax) {
    return mlp_forward_batch({channels}, model, pmax).front();
}

MlpTrainResult train_mlp(const channel::ScenarioConfig& scenario, const TrainConfig& cfg, std::uint64_t seed) {
    MlpTrainResult r{MlpModel::create(scenario.users, scenario.antennas, gnn::channel_feature_scale(scenario), seed), {}};
    const MlpModel& model = r.model;
    EmbeddingFn fn = [&model](ad::Binder& bind, const std::vector<ChannelSet>& sets) {
        return mlp_embeddings(bind, model, sets);
    };
    r.loss_curve = train_unsupervised(r.model.params, fn, scenario, cfg, derive_seed(seed, 1));
    return r;
}

// ---- heuristics ------------------------------------------------------------------

namespace {

double dist(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

bool covers(const Circle& c, const std::vector<Point>& pts) {
    const double tol = 1e-9 * std::max(1.0, c.radius);
    return std::all_of(pts.begin(), pts.end(), [&](Point p) { return dist(p, c.center) <= c.radius + tol; });
}

bool circumcircle(Point a, Point b, Point c, Circle& out) {
    const double d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    if (std::abs(d) < 1e-12) return false;
    const double a2 = a.x * a.x + a.y * a.y, b2 = b.x * b.x + b.y * b.y, c2 = c.x * c.x + c.y * c.y;
    out.center = {(a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d,
                  (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d};
    out.radius = dist(out.center, a);
    return true;
}

double cross(Point o, Point a, Point b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

}  // namespace

Circle min_enclosing_circle(const std::vector<Point>& points) {
    if (points.empty()) throw ContractError("enclosing circle of no points");
    if (points.size() == 1) return {points.front(), 0.0};
    Circle best{{0.0, 0.0}, std::numeric_limits<double>::infinity()};
    const std::size_t n = points.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            Circle c{{(points[i].x + points[j].x) / 2.0, (points[i].y + points[j].y) / 2.0}, dist(points[i], points[j]) / 2.0};
            if (c.radius < best.radius && covers(c, points)) best = c;
            for (std::size_t k = j + 1; k < n; ++k) {
                Circle t;
                if (circumcircle(points[i], points[j], points[k], t) && t.radius < best.radius && covers(t, points)) best = t;
            }
        }
    }
    return best;
}

std::vector<Point> convex_hull(std::vector<Point> pts) {
    std::sort(pts.begin(), pts.end(), [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    std::vector<Point> hull(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

Point mean_position(const std::vector<Point>& points) {
    if (points.empty()) throw ContractError("mean of no points");
    Point m;
    for (Point p : points) {
        m.x += p.x;
        m.y += p.y;
    }
    m.x /= static_cast<double>(points.size());
    m.y /= static_cast<double>(points.size());
    return m;
}

Point polygon_centroid(const std::vector<Point>& points) {
    const auto hull = convex_hull(points);
    if (hull.size() < 3) return mean_position(points);
    double area2 = 0.0, cx = 0.0, cy = 0.0;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const Point a = hull[i];
        const Point b = hull[(i + 1) % hull.size()];
        const double c = a.x * b.y - b.x * a.y;
        area2 += c;
        cx += (a.x + b.x) * c;
        cy += (a.y + b.y) * c;
    }
    if (std::abs(area2) < 1e-9) return mean_position(points);
    return {cx / (3.0 * area2), cy / (3.0 * area2)};
}

std::array<LabeledPosition, 4> heuristic_positions(const Topology& topo) {
    if (topo.users.empty()) throw ContractError("heuristics need at least one user");
    return {{{"area_center", {topo.area_side / 2.0, topo.area_side / 2.0}},
             {"geometric_center", mean_position(topo.users)},
             {"circumcenter", min_enclosing_circle(topo.users).center},
             {"polygon_centroid", polygon_centroid(topo.users)}}};
}

std::vector<Point> grid_points(double area_side, std::size_t resolution) {
    if (resolution == 0) throw ContractError("grid resolution must be positive");
    const double pitch = area_side / static_cast<double>(resolution);
    std::vector<Point> pts;
    pts.reserve(resolution * resolution);
    for (std::size_t iy = 0; iy < resolution; ++iy)
        for (std::size_t ix = 0; ix < resolution; ++ix)
            pts.push_back({(static_cast<double>(ix) + 0.5) * pitch, (static_cast<double>(iy) + 0.5) * pitch});
    return pts;
}

Point snap_to_grid(Point p, double area_side, std::size_t resolution) {
    const double pitch = area_side / static_cast<double>(resolution);
    auto snap = [&](double v) {
        const double idx = std::clamp(std::floor(v / pitch), 0.0, static_cast<double>(resolution - 1));
        return (idx + 0.5) * pitch;
    };
    return {snap(p.x), snap(p.y)};
}

GridResult grid_search_deployment(const Topology& topo, const channel::ScenarioConfig& cfg, const gnn::GnnModel& gnn,
                                  const std::vector<std::uint64_t>& fading_seeds, std::size_t resolution) {
    GridResult r;
    r.resolution = resolution;
    r.best_reward = -std::numeric_limits<double>::infinity();
    for (Point p : grid_points(topo.area_side, resolution)) {
        const double reward = deploy::compute_reward(topo.with_uav(p), cfg, gnn, fading_seeds);
        r.rewards.push_back(reward);
        if (reward > r.best_reward) {
            r.best_reward = reward;
            r.best_position = p;
        }
    }
    return r;
}

}  // namespace uavsec::baselines
