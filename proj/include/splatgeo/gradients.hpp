#pragma once

#include "splatgeo/camera.hpp"
#include "splatgeo/image.hpp"
#include "splatgeo/losses.hpp"
#include "splatgeo/rasterizer.hpp"
#include "splatgeo/scene.hpp"

#include <span>
#include <vector>

namespace splatgeo {

// One supervised view. `hybrid` is the Stage-1 RGB target built from gt,
// delit and mask.
struct TrainView {
    CameraView camera;
    Image gt;
    Image delit;
    Image mask;         // 1 channel, {0, 1}
    Image prior_normal; // 3 channels, zero = no prior
    Image hybrid;
};

TrainView make_train_view(const CameraView& camera, Image gt, Image delit, Image mask, Image prior_normal);

struct ViewEvaluation {
    LossParts parts;
    double total = 0.0;
};

// Forward loss of one view. When `grad` is non-empty (size = ParamLayout
// size) d total / d params is accumulated into it; `screen_grad` (one entry
// per Gaussian) accumulates the norm of the screen-space mean gradient.
ViewEvaluation evaluate_view(const SceneFile& scene, const TrainView& view, int stage, const LossWeights& weights,
                             const RenderSettings& settings, std::span<double> grad = {},
                             std::span<double> screen_grad = {});

// Sum of per-view totals and their gradients.
double evaluate_views(const SceneFile& scene, std::span<const TrainView> views, int stage, const LossWeights& weights,
                      const RenderSettings& settings, std::span<double> grad = {});

// Gradient of a pixel-space objective: given upstream gradients on the render
// outputs, accumulates d/d params into grad.
void backpropagate_render(const SceneFile& scene, const RasterContext& ctx, const PixelGradients& pixel_grads,
                          std::span<double> grad, std::span<double> screen_grad = {});

// Chains an upstream gradient on the unbiased depth map into the distance and
// normal maps it was built from.
void backpropagate_unbiased_depth(const RenderBundle& bundle, const CameraView& cam, double epsilon,
                                  const Image& grad_depth, Image& grad_distance, Image& grad_normal);

} // namespace splatgeo
