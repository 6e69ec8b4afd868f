#pragma once

#include "splatgeo/config.hpp"
#include "splatgeo/dataset.hpp"
#include "splatgeo/trainer.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace splatgeo {

// Output layout of `train`: stage1/ and stage2/ checkpoints plus the loss log.
struct TrainOutputs {
    TrainState stage1;
    TrainState stage2;
};

// Runs the requested stages (1, 2 or both = 0) and writes checkpoints under
// `out`. Stage 2 alone continues from `resume` (a stage-1 checkpoint dir).
TrainOutputs run_training(const SceneFile& init, const std::vector<TrainView>& views, const TrainConfig& cfg,
                          const std::filesystem::path& out, int stages = 0,
                          const std::filesystem::path& resume = {});

// First-surface depth for each camera, written as view_NNN.pfm into `dir`
// when it is non-empty.
std::vector<Image> extract_first_depths(const SceneFile& scene, const std::vector<CameraView>& cameras,
                                        const WindowSearchConfig& depth, const RenderSettings& render,
                                        const std::filesystem::path& dir = {});

struct PipelineResult {
    GeoMetrics metrics;
    std::size_t gaussians = 0;
    std::size_t mesh_vertices = 0;
    std::size_t mesh_triangles = 0;
    double seconds_synth = 0.0;
    double seconds_train = 0.0;
    double seconds_extract = 0.0;
    double seconds_fuse = 0.0;
    double seconds_eval = 0.0;

    bool passes(const CheckConfig& check) const {
        return metrics.chamfer < check.max_chamfer && metrics.f1 > check.min_f1;
    }
};

// synth -> train -> first-surface depth -> TSDF -> mesh -> metrics, every
// intermediate written below `out` (data/, train/, depths/, mesh.ply).
// Errors are rethrown with the failing stage named.
PipelineResult run_pipeline(const ToolkitConfig& cfg, const std::filesystem::path& out);

} // namespace splatgeo
