#pragma once

#include "splatgeo/camera.hpp"
#include "splatgeo/scene.hpp"

#include <random>

namespace splatgeo::testing {

inline CameraView small_camera(int size = 16, const Vec3& eye = Vec3(0.05, -0.03, -2.0)) {
    return make_look_at_camera(eye, Vec3(0, 0, 0), Vec3(0, -1, 0), 0.6 * size, size, size);
}

inline SceneMeta small_meta(int sh_degree = 1) {
    SceneMeta m;
    m.sh_degree = sh_degree;
    m.asg_lobes = 3;
    m.asg_features = 4;
    m.pe_octaves = 2;
    m.decoder_hidden = 6;
    return m;
}

// Large, faint, mid-grey Gaussians: every pixel sees every splat well above
// the alpha cutoff, so finite differences do not cross discrete rules.
inline SceneFile gradient_scene(std::uint64_t seed, int count, const SceneMeta& meta) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SceneFile scene = make_empty_scene(meta, seed + 11);
    for (int i = 0; i < count; ++i) {
        Gaussian g = make_gaussian(meta);
        g.center = Vec3(0.3 * u(rng), 0.3 * u(rng), 0.4 * u(rng));
        g.rotation = Vec4(1.0 + 0.3 * u(rng), 0.4 * u(rng), 0.4 * u(rng), 0.4 * u(rng));
        g.log_scale = Vec3(std::log(4.0 + 0.3 * u(rng)), std::log(3.2 + 0.2 * u(rng)), std::log(0.1 + 0.02 * u(rng)));
        g.opacity_logit = logit(0.25 + 0.04 * u(rng));
        g.transparency_logit = 1.5 * u(rng);
        g.sh[0] = Vec3(1.7 + 0.3 * u(rng), 1.7 + 0.3 * u(rng), 1.7 + 0.3 * u(rng));
        for (std::size_t k = 1; k < g.sh.size(); ++k) g.sh[k] = 0.1 * Vec3(u(rng), u(rng), u(rng));
        for (double& a : g.asg_amplitudes) a = 0.5 * u(rng);
        scene.gaussians.push_back(g);
    }
    // Push the decoder away from its near-saturated start so its gradients are
    // not vanishingly small.
    for (double& b : scene.bank.decoder.b2) b = 0.2 * u(rng);
    for (double& w : scene.bank.decoder.w2) w = u(rng);
    for (double& w : scene.bank.decoder.w1) w = 0.5 * u(rng);
    return scene;
}

// Many small opaque-ish splats spread over the view of small_camera (or any
// camera looking at the origin from about 2 m).
inline SceneFile scattered_scene(std::uint64_t seed, int count, const SceneMeta& meta) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SceneFile scene = make_empty_scene(meta, seed + 3);
    for (int i = 0; i < count; ++i) {
        Gaussian g = make_gaussian(meta);
        g.center = Vec3(0.8 * u(rng), 0.8 * u(rng), 0.5 * u(rng));
        g.rotation = Vec4(1.0 + 0.5 * u(rng), u(rng), u(rng), u(rng));
        g.log_scale = Vec3(std::log(0.03 + 0.02 * u(rng)), std::log(0.03 + 0.02 * u(rng)), std::log(0.005));
        g.opacity_logit = 2.0 * u(rng);
        g.transparency_logit = 2.0 * u(rng);
        for (auto& c : g.sh) c = Vec3(u(rng), u(rng), u(rng));
        g.sh[0] = Vec3(1.8 + u(rng), 1.8 + u(rng), 1.8 + u(rng));
        for (double& a : g.asg_amplitudes) a = u(rng);
        scene.gaussians.push_back(g);
    }
    return scene;
}

} // namespace splatgeo::testing
