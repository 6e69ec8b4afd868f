#pragma once

#include "splatgeo/gradients.hpp"
#include "splatgeo/losses.hpp"
#include "splatgeo/rasterizer.hpp"
#include "splatgeo/scene.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace splatgeo {

struct LearningRates {
    double center = 4e-5;         // metres per step at the start of a stage
    double center_final = 4e-7;   // exponential decay target
    double rotation = 1e-3;
    double scale = 5e-3;
    double opacity = 0.05;
    double sh_dc = 2.5e-3;
    double sh_rest = 1.25e-4;
    double transparency = 0.05;
    double amplitude = 2.5e-3;
    double bank = 2.5e-3;
};

struct TrainConfig {
    int iters_stage1 = 1500;
    int iters_stage2 = 1500;
    LearningRates lr;
    LossWeights weights;
    RenderSettings render;
    int densify_interval = 100;
    double densify_threshold = 2e-4;
    std::size_t max_gaussians = 8000;
    double split_scale = 0.01; // Gaussians larger than this (metres) split instead of clone
    double prune_opacity = 5e-3;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainState {
    SceneFile scene;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::vector<std::uint64_t> step_count; // Adam step per parameter group
    int iteration = 0;
    int stage = 1;
    std::array<bool, static_cast<int>(ParamGroup::Count)> frozen{};
    std::vector<double> screen_grad_sum; // per Gaussian, for densification
    std::vector<int> screen_grad_views;

    bool is_frozen(ParamGroup g) const { return frozen[static_cast<int>(g)]; }
};

TrainState make_train_state(const SceneFile& scene, int stage);

// Per-iteration log row.
struct TrainLogRow {
    int stage = 1;
    int iteration = 0;
    LossParts parts;
    double total = 0.0;
    std::size_t gaussians = 0;
};

class TrainLog {
public:
    explicit TrainLog(std::ostream* csv = nullptr);
    void write(const TrainLogRow& row);
    const std::vector<TrainLogRow>& rows() const { return rows_; }

private:
    std::ostream* csv_;
    std::vector<TrainLogRow> rows_;
};

// Stage 1: geometry and diffuse colour against the hybrid images. Stage 2:
// opacity and transparency frozen, full appearance against the ground truth.
// On a non-finite loss, throws Diverged and leaves `state` at the last good
// iteration.
void train_stage(TrainState& state, std::span<const TrainView> views, const TrainConfig& cfg, int stage,
                 TrainLog* log = nullptr);

TrainState train_stage1(const SceneFile& init, std::span<const TrainView> views, const TrainConfig& cfg,
                        TrainLog* log = nullptr);
TrainState train_stage2(const TrainState& stage1, std::span<const TrainView> views, const TrainConfig& cfg,
                        TrainLog* log = nullptr);

// Clone or split Gaussians whose mean screen-gradient norm exceeds the
// threshold, then prune low-opacity ones (never below one record).
void densify_and_prune(TrainState& state, const TrainConfig& cfg, std::uint64_t seed);

// One Adam update on every unfrozen parameter. `grad` uses ParamLayout.
void adam_step(TrainState& state, std::span<const double> grad, const TrainConfig& cfg, double center_lr);

// Checkpoint: scene file plus a binary sidecar with the optimiser moments.
void save_checkpoint(const TrainState& state, const std::filesystem::path& dir);
TrainState load_checkpoint(const std::filesystem::path& dir);

} // namespace splatgeo
