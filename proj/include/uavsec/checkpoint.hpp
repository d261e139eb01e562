#pragma once

// Versioned JSON checkpoints. Layout:
//   { "format": "uavsec-checkpoint", "version": 1, "type": "gnn" | "mlp" | "sac",
//     "metadata": { ... },
//     "parameters": [ { "name": ..., "shape": [rows, cols], "values": [row-major] }, ... ] }
// Doubles are written in shortest round-trip form, so load(save(m)) is value-exact.

#include "uavsec/baselines.hpp"
#include "uavsec/gnn.hpp"
#include "uavsec/sac.hpp"

#include <filesystem>
#include <string>

namespace uavsec::io {

inline constexpr int kCheckpointVersion = 1;

void save_gnn(const gnn::GnnModel& model, const std::filesystem::path& path);
gnn::GnnModel load_gnn(const std::filesystem::path& path);

void save_mlp(const baselines::MlpModel& model, const std::filesystem::path& path);
baselines::MlpModel load_mlp(const std::filesystem::path& path);

void save_sac(const sac::SacModel& model, const std::filesystem::path& path);
sac::SacModel load_sac(const std::filesystem::path& path);

// The "type" tag of a checkpoint file.
std::string checkpoint_type(const std::filesystem::path& path);

}  // namespace uavsec::io
