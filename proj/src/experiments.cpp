#include "uavsec/experiments.hpp"

#include "uavsec/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace uavsec::exp {

namespace fs = std::filesystem;
using channel::ChannelSet;
using channel::ScenarioConfig;

namespace {

constexpr std::uint64_t kHeldOutStream = 0x4E1D;
constexpr std::uint64_t kMlpRetrainStream = 0x3100;
constexpr std::uint64_t kTopologyStream = 0xD0;
constexpr std::uint64_t kFadingStream = 0xF00;
constexpr std::uint64_t kBenchStream = 0xBE;
constexpr std::size_t kBenchRounds = 3;

const double kNaN = std::numeric_limits<double>::quiet_NaN();

ScenarioConfig with_users(ScenarioConfig s, std::size_t k) {
    s.users = k;
    return s;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

}  // namespace

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---- tables ------------------------------------------------------------------

ResultTable::ResultTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
    if (columns_.empty()) throw DimensionError("result table needs at least one column");
}

void ResultTable::add_row(const std::vector<Cell>& cells) {
    if (cells.size() != columns_.size()) {
        throw DimensionError("row has " + std::to_string(cells.size()) + " cells, table has " +
                             std::to_string(columns_.size()) + " columns");
    }
    std::vector<std::string> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
        if (const auto* d = std::get_if<double>(&c))
            row.push_back(format_number(*d));
        else if (const auto* i = std::get_if<long long>(&c))
            row.push_back(std::to_string(*i));
        else
            row.push_back(std::get<std::string>(c));
    }
    rows_.push_back(std::move(row));
}

std::size_t ResultTable::column(const std::string& name) const {
    auto it = std::find(columns_.begin(), columns_.end(), name);
    if (it == columns_.end()) throw DimensionError("no column named " + name);
    return static_cast<std::size_t>(it - columns_.begin());
}

const std::string& ResultTable::text(std::size_t row, const std::string& col) const { return rows_.at(row).at(column(col)); }

double ResultTable::number(std::size_t row, const std::string& col) const { return std::stod(text(row, col)); }

std::string ResultTable::to_csv() const {
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << "\n";
    };
    line(columns_);
    for (const auto& r : rows_) line(r);
    return out.str();
}

void ResultTable::write_csv(const fs::path& path) const {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_csv();
}

ResultTable loss_curve_table(const std::vector<double>& losses) {
    ResultTable t({"epoch", "loss"});
    for (std::size_t i = 0; i < losses.size(); ++i) t.add_row({static_cast<long long>(i), losses[i]});
    return t;
}

ResultTable sac_curve_table(const std::vector<sac::EpisodeLog>& episodes) {
    ResultTable t({"episode", "cumulative_reward", "final_secrecy_rate"});
    for (const auto& e : episodes)
        t.add_row({static_cast<long long>(e.episode), e.cumulative_reward, e.final_secrecy_rate});
    return t;
}

ResultTable trace_table(const std::vector<sac::TracePoint>& trace) {
    ResultTable t({"step", "x", "y", "reward"});
    for (const auto& p : trace) t.add_row({static_cast<long long>(p.step), p.position.x, p.position.y, p.reward});
    return t;
}

// ---- evaluation --------------------------------------------------------------

std::vector<ChannelSet> held_out_scenarios(const ScenarioConfig& scenario, std::size_t count, std::uint64_t seed) {
    Rng rng(derive_seed(seed, kHeldOutStream + scenario.users));
    return sample_scenarios(scenario, count, rng);
}

double mean_sum_secrecy(const std::vector<ChannelSet>& sets, const std::vector<secrecy::Beamformer>& bfs,
                        double noise_power) {
    if (sets.size() != bfs.size() || sets.empty()) throw DimensionError("one beamformer per scenario required");
    double total = 0.0;
    for (std::size_t i = 0; i < sets.size(); ++i) total += secrecy::secrecy_report(sets[i], bfs[i], noise_power).sum;
    return total / static_cast<double>(sets.size());
}

namespace {

std::vector<secrecy::Beamformer> mrt_all(const std::vector<ChannelSet>& sets, double pmax) {
    std::vector<secrecy::Beamformer> out;
    out.reserve(sets.size());
    for (const auto& s : sets) out.push_back(baselines::mrt_beamformer(s, pmax));
    return out;
}

}  // namespace

ResultTable run_eval(const RunConfig& cfg, const gnn::GnnModel& gnn, const baselines::MlpModel* mlp) {
    const auto& sc = cfg.scenario;
    const auto sets = held_out_scenarios(sc, cfg.eval.scenarios, cfg.seed);
    ResultTable t({"scheme", "users", "mean_sum_secrecy"});
    const auto k = static_cast<long long>(sc.users);
    t.add_row({"gnn", k, mean_sum_secrecy(sets, gnn::gnn_forward_batch(sets, gnn, sc.power_budget), sc.noise_power)});
    if (mlp != nullptr) {
        t.add_row({"mlp", k,
                   mean_sum_secrecy(sets, baselines::mlp_forward_batch(sets, *mlp, sc.power_budget), sc.noise_power)});
    }
    t.add_row({"mrt", k, mean_sum_secrecy(sets, mrt_all(sets, sc.power_budget), sc.noise_power)});
    return t;
}

SweepKind parse_sweep_kind(const std::string& name) {
    if (name == "users") return SweepKind::users;
    if (name == "power") return SweepKind::power;
    if (name == "noise") return SweepKind::noise;
    throw ConfigError("unknown sweep kind: " + name);
}

std::string sweep_name(SweepKind kind) {
    switch (kind) {
        case SweepKind::users: return "users";
        case SweepKind::power: return "power";
        case SweepKind::noise: return "noise";
    }
    return "";
}

ResultTable run_sweep(SweepKind kind, const RunConfig& cfg, const gnn::GnnModel& gnn, const baselines::MlpModel* mlp) {
    ResultTable t({"scheme", "sweep", "value", "users", "power_budget", "noise_power", "mean_sum_secrecy", "status"});
    const std::string name = sweep_name(kind);

    struct Point {
        double value;
        ScenarioConfig sc;
    };
    std::vector<Point> points;
    if (kind == SweepKind::users) {
        for (auto k : cfg.eval.user_counts) points.push_back({static_cast<double>(k), with_users(cfg.scenario, k)});
    } else {
        for (double f : kind == SweepKind::power ? cfg.eval.power_factors : cfg.eval.noise_factors) {
            ScenarioConfig sc = cfg.scenario;
            (kind == SweepKind::power ? sc.power_budget : sc.noise_power) *= f;
            points.push_back({f, sc});
        }
    }

    for (const auto& p : points) {
        const auto& sc = p.sc;
        const auto sets = held_out_scenarios(sc, cfg.eval.scenarios, cfg.seed);
        auto row = [&](const std::string& scheme, double mean, const std::string& status) {
            t.add_row({scheme, name, p.value, static_cast<long long>(sc.users), sc.power_budget, sc.noise_power, mean,
                       status});
        };
        row("gnn", mean_sum_secrecy(sets, gnn::gnn_forward_batch(sets, gnn, sc.power_budget), sc.noise_power), "ok");

        if (mlp != nullptr && mlp->users == sc.users && mlp->antennas == sc.antennas) {
            row("mlp", mean_sum_secrecy(sets, baselines::mlp_forward_batch(sets, *mlp, sc.power_budget), sc.noise_power),
                "ok");
        } else if (cfg.eval.retrain_mlp) {
            const auto fresh = baselines::train_mlp(sc, cfg.gnn, derive_seed(cfg.seed, kMlpRetrainStream + sc.users));
            row("mlp",
                mean_sum_secrecy(sets, baselines::mlp_forward_batch(sets, fresh.model, sc.power_budget), sc.noise_power),
                "retrained");
        } else {
            row("mlp", kNaN, mlp == nullptr ? "no_model" : "retrain_required");
        }

        row("mrt", mean_sum_secrecy(sets, mrt_all(sets, sc.power_budget), sc.noise_power), "ok");
    }
    return t;
}

ResultTable run_cdf(const RunConfig& cfg, const gnn::GnnModel& gnn, const baselines::MlpModel* mlp) {
    ResultTable t({"scheme", "users", "secrecy_rate", "cdf"});
    auto emit = [&](const std::string& scheme, std::size_t k, const std::vector<ChannelSet>& sets,
                    const std::vector<secrecy::Beamformer>& bfs) {
        std::vector<double> rates;
        for (std::size_t i = 0; i < sets.size(); ++i) {
            const auto r = secrecy::secrecy_report(sets[i], bfs[i], cfg.scenario.noise_power);
            rates.insert(rates.end(), r.secrecy_rates.begin(), r.secrecy_rates.end());
        }
        std::sort(rates.begin(), rates.end());
        const double n = static_cast<double>(rates.size());
        for (std::size_t i = 0; i < rates.size(); ++i)
            t.add_row({scheme, static_cast<long long>(k), rates[i], static_cast<double>(i + 1) / n});
    };
    const double pmax = cfg.scenario.power_budget;
    for (auto k : cfg.eval.cdf_users) {
        const ScenarioConfig sc = with_users(cfg.scenario, k);
        const auto sets = held_out_scenarios(sc, cfg.eval.scenarios, cfg.seed);
        emit("gnn", k, sets, gnn::gnn_forward_batch(sets, gnn, pmax));
        if (mlp != nullptr && mlp->users == k) emit("mlp", k, sets, baselines::mlp_forward_batch(sets, *mlp, pmax));
        emit("mrt", k, sets, mrt_all(sets, pmax));
    }
    return t;
}

// ---- deployment ----------------------------------------------------------------

std::vector<DeployCase> deployment_cases(const RunConfig& cfg) {
    std::vector<DeployCase> out;
    for (std::size_t i = 0; i < cfg.eval.topologies; ++i) {
        Rng rng(derive_seed(cfg.seed, kTopologyStream + i));
        out.push_back({channel::sample_topology(cfg.scenario, rng),
                       deploy::fading_seed_set(cfg.seed, kFadingStream + i, cfg.sac.fading_draws)});
    }
    return out;
}

DeployOutcome run_deploy_case(const DeployCase& dc, const RunConfig& cfg, const gnn::GnnModel& gnn,
                              std::uint64_t seed) {
    sac::SacConfig sc = cfg.sac;
    sc.freeze_fading = true;
    DeployOutcome out;
    out.sac = sac::train_sac(dc.topology, cfg.scenario, sc, gnn, dc.fading_seeds, seed);
    out.grid = baselines::grid_search_deployment(dc.topology, cfg.scenario, gnn, dc.fading_seeds,
                                                 cfg.eval.grid_resolution);
    return out;
}

ResultTable deploy_compare_table() { return ResultTable({"topology", "strategy", "x", "y", "reward"}); }

void append_deploy_rows(ResultTable& table, std::size_t topology_index, const DeployCase& dc,
                        const DeployOutcome& outcome, const ScenarioConfig& scenario, const gnn::GnnModel& gnn) {
    const auto idx = static_cast<long long>(topology_index);
    auto row = [&](const std::string& label, channel::Point p, double reward) {
        table.add_row({idx, label, p.x, p.y, reward});
    };
    row("sac", outcome.sac.final_position, outcome.sac.final_reward);
    row("grid_oracle", outcome.grid.best_position, outcome.grid.best_reward);
    for (const auto& h : baselines::heuristic_positions(dc.topology)) {
        row(h.label, h.position, deploy::compute_reward(dc.topology.with_uav(h.position), scenario, gnn, dc.fading_seeds));
    }
}

// ---- timing ---------------------------------------------------------------------

ResultTable bench_inference(const RunConfig& cfg, const gnn::GnnModel& gnn, const baselines::MlpModel* mlp,
                            std::size_t repeats) {
    if (repeats == 0) throw ConfigError("invalid value: repeats");
    ResultTable t({"scheme", "users", "grid", "repeats", "total_seconds", "per_run_seconds"});
    const double pmax = cfg.scenario.power_budget;
    auto add = [&](const std::string& scheme, std::size_t k, std::size_t grid, std::size_t runs, double total) {
        t.add_row({scheme, static_cast<long long>(k), static_cast<long long>(grid), static_cast<long long>(runs), total,
                   total / static_cast<double>(runs)});
    };
    double sink = 0.0;
    for (auto k : cfg.eval.bench_users) {
        const ScenarioConfig sc = with_users(cfg.scenario, k);
        Rng rng(derive_seed(cfg.seed, kBenchStream + k));
        const auto sets = sample_scenarios(sc, repeats, rng);

        // one untimed warm-up call, then the fastest of kBenchRounds passes over the set
        auto timed = [&](const std::string& scheme, const std::function<double(const ChannelSet&)>& f) {
            sink += f(sets.front());
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t round = 0; round < kBenchRounds; ++round) {
                const auto t0 = Clock::now();
                for (const auto& s : sets) sink += f(s);
                best = std::min(best, seconds_since(t0));
            }
            add(scheme, k, 0, repeats, best);
        };
        timed("gnn", [&](const ChannelSet& s) { return gnn::gnn_forward(s, gnn, pmax).total_power(); });
        if (mlp != nullptr && mlp->users == k)
            timed("mlp", [&](const ChannelSet& s) { return baselines::mlp_forward(s, *mlp, pmax).total_power(); });
        timed("mrt", [&](const ChannelSet& s) { return baselines::mrt_beamformer(s, pmax).total_power(); });
    }

    Rng rng(derive_seed(cfg.seed, kBenchStream));
    const auto topo = channel::sample_topology(cfg.scenario, rng);
    const auto seeds = deploy::fading_seed_set(cfg.seed, kBenchStream, cfg.sac.fading_draws);
    const std::size_t full = cfg.eval.grid_resolution;
    const std::size_t grid_runs = std::max<std::size_t>(1, repeats / 100);
    for (std::size_t g : {std::max<std::size_t>(1, full / 2), full}) {
        const auto t0 = Clock::now();
        for (std::size_t r = 0; r < grid_runs; ++r)
            sink += baselines::grid_search_deployment(topo, cfg.scenario, gnn, seeds, g).best_reward;
        add("grid_oracle", cfg.scenario.users, g, grid_runs, seconds_since(t0));
    }
    if (!std::isfinite(sink)) throw DomainError("non-finite benchmark output");
    return t;
}

// ---- transfer -------------------------------------------------------------------

TransferRun run_transfer(const RunConfig& cfg, const gnn::GnnModel& pretrained, std::size_t users,
                         std::uint64_t seed) {
    const ScenarioConfig sc = with_users(cfg.scenario, users);
    TransferRun run;
    run.scratch_loss = gnn::train_gnn(sc, cfg.gnn, seed, pretrained.arch.layers).loss_curve;
    run.transfer_loss = gnn::transfer_train(pretrained, sc, cfg.gnn, seed).loss_curve;
    if (run.scratch_loss.empty()) throw ConfigError("invalid training value: epochs");
    const std::size_t w = std::min(kSmoothingWindow, run.scratch_loss.size());
    run.scratch_final_smoothed = moving_average(run.scratch_loss, w).back();
    const auto sm = moving_average(run.transfer_loss, w);
    run.epochs_to_reach = run.transfer_loss.size() + 1;
    for (std::size_t i = 0; i < sm.size(); ++i) {
        if (sm[i] <= run.scratch_final_smoothed) {
            run.epochs_to_reach = i + w;
            break;
        }
    }
    return run;
}

ResultTable transfer_table(const TransferRun& run) {
    ResultTable t({"epoch", "scratch_loss", "transfer_loss"});
    for (std::size_t i = 0; i < run.scratch_loss.size(); ++i)
        t.add_row({static_cast<long long>(i), run.scratch_loss[i],
                   i < run.transfer_loss.size() ? run.transfer_loss[i] : kNaN});
    return t;
}

// ---- manifest -------------------------------------------------------------------

void write_manifest(const fs::path& dir, const RunConfig& cfg, const std::string& command,
                    const std::vector<std::string>& extra) {
    fs::create_directories(dir);
    std::ofstream out(dir / "manifest.txt", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
    out << "command: " << command << "\n";
    out << "seed: " << cfg.seed << "\n";
    out << "config_hash: " << config_hash(cfg) << "\n";
    out << "uavsec_version: 1.0.0\n";
    out << "compiler: " << __VERSION__ << "\n";
    out << "eigen: " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION << "\n";
    for (const auto& line : extra) out << line << "\n";
    out << "config:\n" << run_config_to_json_text(cfg) << "\n";
}

}  // namespace uavsec::exp
