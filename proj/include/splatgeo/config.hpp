#pragma once

#include "splatgeo/depth.hpp"
#include "splatgeo/synth.hpp"
#include "splatgeo/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

namespace splatgeo {

struct FuseConfig {
    double voxel = 0.004;
    double truncation_factor = 5.0;
};

struct EvalConfig {
    double tau = 0.005;
    std::uint64_t samples = 100000;
    std::uint64_t sample_seed = 0;
    double crop_margin = 0.01; // predicted mesh is cropped to the GT box grown by this
};

// Thresholds enforced by `pipeline --check`.
struct CheckConfig {
    double max_chamfer = 0.01;
    double min_f1 = 0.7;
};

// Everything a command can be configured with. Defaults live here and only
// here; --print-defaults dumps this struct.
struct ToolkitConfig {
    int threads = 0; // 0: SPLATGEO_THREADS or hardware concurrency
    std::uint64_t seed = 0;
    SynthSpec synth;
    TrainConfig train;
    WindowSearchConfig depth;
    FuseConfig fuse;
    EvalConfig eval;
    CheckConfig check;

    // Propagates seed/threads into the sub-configs and validates them all.
    // Throws InvalidConfig / InvalidSpec.
    void finalize();
};

nlohmann::json config_to_json(const ToolkitConfig& cfg);

// Applies `patch` on top of `base`. Unknown keys and type mismatches throw
// InvalidConfig naming the dotted path.
ToolkitConfig config_from_json(const nlohmann::json& patch, const ToolkitConfig& base = {});

ToolkitConfig load_config(const std::filesystem::path& path, const ToolkitConfig& base = {});

// "a.b.c=value" with value parsed as JSON (bare words are taken as strings).
void apply_override(ToolkitConfig& cfg, const std::string& assignment);

nlohmann::json spec_to_json(const SynthSpec& spec);

} // namespace splatgeo
