#pragma once

// Central finite-difference checks of every analytic gradient path, shared
// by the unit tests and the acceptance binary.

#include "splatgeo/depth.hpp"
#include "splatgeo/gradients.hpp"
#include "splatgeo/image_quality.hpp"
#include "splatgeo/losses.hpp"
#include "splatgeo/rasterizer.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace splatgeo::gradcheck {

using splatgeo::testing::gradient_scene;
using splatgeo::testing::small_camera;
using splatgeo::testing::small_meta;

constexpr double kStep = 1e-4;

inline Image random_image(int w, int h, int c, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Image img(w, h, c);
    for (double& v : img.data()) v = u(rng);
    return img;
}

inline Image random_normals(int w, int h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Image img(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            // Mostly camera-facing so the prior mask keeps most pixels.
            Vec3 v(0.4 * n(rng), 0.4 * n(rng), -1.0);
            v.normalize();
            if ((x + 2 * y) % 7 == 0) v = Vec3::Zero();
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = v[c];
        }
    return img;
}

// Rejects configurations where a finite-difference step could flip one of the
// discrete rules (alpha cutoff/clamp, mask owner, colour clamps, normal sign,
// min-scale axis, denominator floor).
inline bool smooth_configuration(const SceneFile& scene, const CameraView& cam, int stage, const RenderSettings& rs,
                          const Image& prior, double theta_n) {
    const RasterContext ctx = prepare_view(scene, cam, stage, rs);
    if (ctx.visible.size() != scene.size()) return false;
    for (const auto& pg : ctx.visible) {
        const Gaussian& g = scene.gaussians[pg.proj.index];
        const ActivatedGaussian a = activate(g);
        Vec3 ls = g.log_scale;
        std::sort(ls.data(), ls.data() + 3);
        if (ls[1] - ls[0] < 1e-2) return false;
        if (pg.proj.distance < 1e-3) return false;
        const ViewContext view{pg.view_dir, pg.proj.normal};
        const Vec3 diffuse = sh_eval(a.sh, view.view_dir);
        Vec3 total = diffuse;
        if (stage == 2) total += specular_color(scene.bank, a.asg_amplitudes, view);
        if (diffuse.minCoeff() < 0.02 || total.minCoeff() < 0.02 || total.maxCoeff() > 0.98) return false;
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                const Vec2 d = Vec2(x + 0.5, y + 0.5) - pg.proj.mean;
                const Vec3& q = pg.proj.conic;
                const double raw = pg.opacity * std::exp(-0.5 * (q[0] * d.x() * d.x() + q[2] * d.y() * d.y()) -
                                                         q[1] * d.x() * d.y());
                if (raw < 1.5 / 255.0 || raw > 0.9 * rs.alpha_max) return false;
            }
    }
    RenderSettings keep = rs;
    keep.keep_fragments = true;
    const RenderBundle b = rasterize([&] {
        RasterContext c = ctx;
        c.settings = keep;
        return c;
    }());
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const auto frags = b.fragments.pixel(x, y);
            if (frags.size() != scene.size()) return false;
            for (const auto& f : frags)
                if (std::abs(f.transmittance - rs.theta_t) < 2e-3) return false;
            const Vec3 n(b.normal.at(x, y, 0), b.normal.at(x, y, 1), b.normal.at(x, y, 2));
            if (n.dot(cam.view_vector(x, y)) < 10.0 * rs.plane_epsilon) return false;
            Vec3 p(prior.at(x, y, 0), prior.at(x, y, 1), prior.at(x, y, 2));
            if (p.squaredNorm() > 0.0 && std::abs(p.normalized().dot(n) - theta_n) < 1e-3) return false;
        }
    return true;
}

struct Problem {
    SceneFile scene;
    CameraView cam;
    RenderSettings rs;
    Image prior;
};

inline Problem find_problem(int stage, std::uint64_t seed, int count = 20) {
    Problem p;
    p.cam = small_camera();
    p.rs.threads = 1;
    p.prior = random_normals(16, 16, seed + 101);
    for (std::uint64_t s = seed;; ++s) {
        p.scene = gradient_scene(s, count, small_meta());
        if (smooth_configuration(p.scene, p.cam, stage, p.rs, p.prior, 0.0)) return p;
        if (s > seed + 500) throw std::runtime_error("no smooth configuration found");
    }
}

using Objective = std::function<double(const SceneFile&, std::vector<double>*)>;

inline double relative_error(const SceneFile& scene, const Objective& f) {
    std::vector<double> analytic(layout_for(scene).size(), 0.0);
    f(scene, &analytic);
    std::vector<double> params = pack_params(scene);
    std::vector<double> numeric(params.size());
    SceneFile work = scene;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double orig = params[k];
        params[k] = orig + kStep;
        unpack_params(params, work);
        const double fp = f(work, nullptr);
        params[k] = orig - kStep;
        unpack_params(params, work);
        const double fm = f(work, nullptr);
        params[k] = orig;
        numeric[k] = (fp - fm) / (2.0 * kStep);
    }
    double diff = 0.0, norm = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        diff += (analytic[k] - numeric[k]) * (analytic[k] - numeric[k]);
        norm += numeric[k] * numeric[k];
    }
    if (!(norm > 0.0)) return std::numeric_limits<double>::infinity();
    const double err = std::sqrt(diff / norm);
    return err;
}

// Objective built from render outputs: forward renders, `loss` fills pixel
// gradients when asked, and backpropagate_render chains them.
inline Objective render_objective(const CameraView& cam, int stage, const RenderSettings& rs,
                           std::function<double(const RenderBundle&, PixelGradients*)> loss) {
    return [=](const SceneFile& scene, std::vector<double>* grad) {
        const RasterContext ctx = prepare_view(scene, cam, stage, rs);
        const RenderBundle b = rasterize(ctx);
        if (!grad) return loss(b, nullptr);
        PixelGradients pg;
        const double v = loss(b, &pg);
        backpropagate_render(scene, ctx, pg, *grad);
        return v;
    };
}


struct CheckResult {
    std::string name;
    double error = 0.0;
    double tolerance = 0.0;
    bool passed() const { return error < tolerance; }
};

inline CheckResult color_l1() {
    auto p = find_problem(1, 1);
    const Image ref = random_image(16, 16, 3, 5);
    return {"rgb L1", relative_error(p.scene, render_objective(p.cam, 1, p.rs, [&](const RenderBundle& b, PixelGradients* g) {
                return rgb_loss(b.color, ref, 0.0, g ? &g->color : nullptr);
            })),
            1e-4};
}

inline CheckResult color_ssim() {
    auto p = find_problem(1, 2);
    const Image ref = random_image(16, 16, 3, 6);
    return {"rgb SSIM", relative_error(p.scene, render_objective(p.cam, 1, p.rs, [&](const RenderBundle& b, PixelGradients* g) {
                return rgb_loss(b.color, ref, 1.0, g ? &g->color : nullptr);
            })),
            1e-3};
}

inline CheckResult stage_two_color() {
    auto p = find_problem(2, 3);
    const Image ref = random_image(16, 16, 3, 7);
    return {"stage-2 rgb L1 with specular bank",
            relative_error(p.scene, render_objective(p.cam, 2, p.rs, [&](const RenderBundle& b, PixelGradients* g) {
                return rgb_loss(b.color, ref, 0.0, g ? &g->color : nullptr);
            })),
            1e-4};
}

inline CheckResult transparency_bce() {
    auto p = find_problem(1, 4);
    Image target(16, 16, 1);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) target.at(x, y) = (x / 4 + y / 4) % 2;
    return {"transparency BCE",
            relative_error(p.scene, render_objective(p.cam, 1, p.rs, [&](const RenderBundle& b, PixelGradients* g) {
                return transparency_loss(b.mask, target, g ? &g->mask : nullptr);
            })),
            1e-4};
}

inline CheckResult normal_prior() {
    auto p = find_problem(1, 5);
    return {"normal prior",
            relative_error(p.scene, render_objective(p.cam, 1, p.rs, [&](const RenderBundle& b, PixelGradients* g) {
                return normal_prior_loss(b.normal, p.prior, 0.0, g ? &g->normal : nullptr);
            })),
            1e-4};
}

inline CheckResult depth_normal() {
    auto p = find_problem(1, 6);
    const CameraView cam = p.cam;
    const double eps = p.rs.plane_epsilon;
    return {"depth-normal consistency",
            relative_error(p.scene, render_objective(cam, 1, p.rs, [&](const RenderBundle& b, PixelGradients* g) {
                const Image depth = unbiased_depth_map(b, cam, eps);
                if (!g) return depth_normal_consistency(depth, b.normal, cam);
                ConsistencyGradient cg;
                const double v = depth_normal_consistency(depth, b.normal, cam, &cg);
                g->normal = cg.normal;
                g->distance = Image(cam.width, cam.height, 1);
                backpropagate_unbiased_depth(b, cam, eps, cg.depth, g->distance, g->normal);
                return v;
            })),
            1e-4};
}

inline CheckResult flatten() {
    auto p = find_problem(1, 7);
    return {"flatten", relative_error(p.scene, [](const SceneFile& s, std::vector<double>* g) {
                return flatten_loss(s, g ? std::span<double>(*g) : std::span<double>());
            }),
            1e-4};
}

// The totals include the SSIM part of the rgb loss, hence the looser bound.
inline CheckResult stage_total_check(int stage) {
    auto p = find_problem(stage, 8 + stage);
    Image mask(16, 16, 1);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) mask.at(x, y) = x > 7;
    TrainView view = make_train_view(p.cam, random_image(16, 16, 3, 21), random_image(16, 16, 3, 22), mask, p.prior);
    LossWeights w;
    w.lambda_f = 0.1; // keep the flatten term from swamping the others
    return {"stage-" + std::to_string(stage) + " total",
            relative_error(p.scene, [&](const SceneFile& s, std::vector<double>* g) {
                return evaluate_view(s, view, stage, w, p.rs, g ? std::span<double>(*g) : std::span<double>()).total;
            }),
            1e-3};
}

inline CheckResult decoder_parameters() {
    const AsgBank bank = make_asg_bank(4, 5, 3, 7, 99);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> input(bank.decoder.inputs);
    for (double& v : input) v = u(rng);
    SpecularDecoder dec = bank.decoder;
    for (double& b : dec.b2) b = 0.3 * u(rng);
    const Vec3 weight(0.7, -0.4, 1.1);
    auto f = [&](const SpecularDecoder& d) { return weight.dot(decode_specular(d, input)); };

    std::vector<double> analytic(dec.param_count(), 0.0), g_in(input.size(), 0.0);
    decode_specular_backward(dec, input, weight, g_in, analytic);
    std::vector<double*> params;
    for (auto* v : {&dec.w1, &dec.b1, &dec.w2, &dec.b2})
        for (double& x : *v) params.push_back(&x);
    double diff = 0.0, norm = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double orig = *params[k];
        *params[k] = orig + 1e-5;
        const double fp = f(dec);
        *params[k] = orig - 1e-5;
        const double fm = f(dec);
        *params[k] = orig;
        const double num = (fp - fm) / 2e-5;
        diff += (num - analytic[k]) * (num - analytic[k]);
        norm += num * num;
    }
    return {"specular decoder", std::sqrt(diff / norm), 1e-4};
}

inline std::vector<CheckResult> all_checks() {
    return {color_l1(),         color_ssim(), stage_two_color(),   transparency_bce(),  normal_prior(),
            depth_normal(),     flatten(),    stage_total_check(1), stage_total_check(2), decoder_parameters()};
}

} // namespace splatgeo::gradcheck
