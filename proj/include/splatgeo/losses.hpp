#pragma once

#include "splatgeo/camera.hpp"
#include "splatgeo/image.hpp"
#include "splatgeo/scene.hpp"

#include <span>

namespace splatgeo {

struct LossWeights {
    double lambda_r = 0.2;
    double lambda_t = 0.1;
    double lambda_n = 0.1;
    double lambda_f = 100.0;
    double theta_n = 0.0;
    double theta_t = 0.5;
};

// mask * delit + (1 - mask) * gt. The mask has one channel.
Image hybrid_delight(const Image& gt, const Image& delit, const Image& mask);

// Mean absolute difference; grad (optional) is d/d rendered.
double l1_loss(const Image& rendered, const Image& reference, Image* grad = nullptr);

// (1 - lambda_r) * L1 + lambda_r * (1 - SSIM).
double rgb_loss(const Image& rendered, const Image& reference, double lambda_r, Image* grad = nullptr);

inline constexpr double kBceEpsilon = 1e-6;

// Mean binary cross-entropy of the rendered mask against a {0,1} target.
double transparency_loss(const Image& predicted, const Image& target, Image* grad = nullptr);

// Mean over pixels with a nonzero prior of M * (1 - n_p . n_r), with the
// prior normalised and M = [n_p . n_r >= theta_n] held constant.
double normal_prior_loss(const Image& rendered, const Image& prior, double theta_n, Image* grad = nullptr);

struct ConsistencyGradient {
    Image depth;  // d/d depth
    Image normal; // d/d rendered normal
};

// Normal from back-projected depth: normalize(dY x dX) with central
// differences; mean of (1 - n_d . n_r) over interior pixels whose four
// neighbours and centre all have depth > 0.
double depth_normal_consistency(const Image& depth, const Image& rendered_normal, const CameraView& cam,
                                ConsistencyGradient* grad = nullptr);

// Depth-derived normal map (zero where undefined).
Image depth_to_normal(const Image& depth, const CameraView& cam);

// Sum over Gaussians of the smallest activated scale. grad, when non-empty,
// is a flat parameter vector (ParamLayout) that receives d/d log-scale.
double flatten_loss(const SceneFile& scene, std::span<double> grad = {});

struct LossParts {
    double rgb = 0.0;
    double transparency = 0.0;
    double normal_prior = 0.0;
    double consistency = 0.0;
    double flatten = 0.0;
};

// rgb + lambda_t trans + lambda_n (prior + consistency) + lambda_f flatten.
// Both stages share the form; they differ in the RGB reference. Throws
// NonfinitePart naming the offending term.
double stage_total(int stage, const LossParts& parts, const LossWeights& weights);

} // namespace splatgeo
