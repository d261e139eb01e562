#pragma once

// Experiment drivers behind the CLI: result tables, sweeps, CDFs, deployment
// comparison, timing, transfer runs and run manifests.

#include "uavsec/baselines.hpp"
#include "uavsec/config.hpp"
#include "uavsec/gnn.hpp"
#include "uavsec/sac.hpp"

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace uavsec::exp {

// "%.17g": round-trips doubles.
std::string format_number(double v);

class ResultTable {
  public:
    using Cell = std::variant<double, long long, std::string>;

    explicit ResultTable(std::vector<std::string> columns);

    // Throws DimensionError unless the row has one cell per column.
    void add_row(const std::vector<Cell>& cells);

    const std::vector<std::string>& columns() const { return columns_; }
    std::size_t size() const { return rows_.size(); }
    std::size_t column(const std::string& name) const;
    const std::string& text(std::size_t row, const std::string& col) const;
    double number(std::size_t row, const std::string& col) const;

    std::string to_csv() const;
    void write_csv(const std::filesystem::path& path) const;

  private:
    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

ResultTable loss_curve_table(const std::vector<double>& losses);
ResultTable sac_curve_table(const std::vector<sac::EpisodeLog>& episodes);
ResultTable trace_table(const std::vector<sac::TracePoint>& trace);

// E held-out scenarios for scheme comparisons; independent of any training stream.
std::vector<channel::ChannelSet> held_out_scenarios(const channel::ScenarioConfig& scenario, std::size_t count,
                                                    std::uint64_t seed);

double mean_sum_secrecy(const std::vector<channel::ChannelSet>& sets, const std::vector<secrecy::Beamformer>& bfs,
                        double noise_power);

// scheme, users, mean_sum_secrecy
ResultTable run_eval(const RunConfig& cfg, const gnn::GnnModel& gnn, const baselines::MlpModel* mlp);

enum class SweepKind { users, power, noise };
SweepKind parse_sweep_kind(const std::string& name);
std::string sweep_name(SweepKind kind);

// One row per (scheme, sweep value):
// scheme, sweep, value, users, power_budget, noise_power, mean_sum_secrecy, status.
// The MLP is only valid at its trained K; elsewhere the row is marked
// retrain_required (mean nan) unless cfg.eval.retrain_mlp is set.
ResultTable run_sweep(SweepKind kind, const RunConfig& cfg, const gnn::GnnModel& gnn, const baselines::MlpModel* mlp);

// Per-user secrecy rates with empirical CDF: scheme, users, secrecy_rate, cdf.
ResultTable run_cdf(const RunConfig& cfg, const gnn::GnnModel& gnn, const baselines::MlpModel* mlp);

struct DeployCase {
    channel::Topology topology;
    std::vector<std::uint64_t> fading_seeds;
};

// Fixed topologies and frozen fading seeds for deployment experiments.
std::vector<DeployCase> deployment_cases(const RunConfig& cfg);

struct DeployOutcome {
    sac::SacRunResult sac;
    baselines::GridResult grid;
};

// Trains SAC on the case (frozen fading) and runs the grid oracle.
DeployOutcome run_deploy_case(const DeployCase& dc, const RunConfig& cfg, const gnn::GnnModel& gnn,
                              std::uint64_t seed);

// topology, strategy, x, y, reward. Six strategies per topology:
// sac, grid_oracle, area_center, geometric_center, circumcenter, polygon_centroid.
void append_deploy_rows(ResultTable& table, std::size_t topology_index, const DeployCase& dc,
                        const DeployOutcome& outcome, const channel::ScenarioConfig& scenario,
                        const gnn::GnnModel& gnn);
ResultTable deploy_compare_table();

// scheme, users, grid, repeats, total_seconds, per_run_seconds.
// GNN and MRT at every bench K, the MLP at its own K, the grid oracle at the
// scenario K for half and full resolution. Beamformer timings keep the
// fastest of three passes over `repeats` scenarios after a warm-up call.
ResultTable bench_inference(const RunConfig& cfg, const gnn::GnnModel& gnn, const baselines::MlpModel* mlp,
                            std::size_t repeats);

struct TransferRun {
    std::vector<double> scratch_loss;
    std::vector<double> transfer_loss;
    double scratch_final_smoothed = 0.0;
    // Epochs the fine-tuned run needs before its smoothed loss reaches the
    // scratch run's final smoothed loss; epochs + 1 if never.
    std::size_t epochs_to_reach = 0;
};

inline constexpr std::size_t kSmoothingWindow = 10;

TransferRun run_transfer(const RunConfig& cfg, const gnn::GnnModel& pretrained, std::size_t users,
                         std::uint64_t seed);
// epoch, scratch_loss, transfer_loss
ResultTable transfer_table(const TransferRun& run);

// Config echo, seed, hash, build and library versions.
void write_manifest(const std::filesystem::path& dir, const RunConfig& cfg, const std::string& command,
                    const std::vector<std::string>& extra = {});

}  // namespace uavsec::exp
