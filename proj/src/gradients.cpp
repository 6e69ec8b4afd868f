#include "splatgeo/gradients.hpp"

#include "splatgeo/depth.hpp"
#include "splatgeo/error.hpp"
#include "splatgeo/parallel.hpp"
#include "splatgeo/projection.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <algorithm>
#include <cmath>

namespace splatgeo {

TrainView make_train_view(const CameraView& camera, Image gt, Image delit, Image mask, Image prior_normal) {
    TrainView v;
    v.camera = camera;
    v.hybrid = hybrid_delight(gt, delit, mask);
    v.gt = std::move(gt);
    v.delit = std::move(delit);
    v.mask = std::move(mask);
    v.prior_normal = std::move(prior_normal);
    return v;
}

void backpropagate_unbiased_depth(const RenderBundle& bundle, const CameraView& cam, double epsilon,
                                  const Image& grad_depth, Image& grad_distance, Image& grad_normal) {
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const double g = grad_depth.at(x, y);
            if (g == 0.0 || !(bundle.alpha.at(x, y) > 0.0)) continue;
            const Vec3 n(bundle.normal.at(x, y, 0), bundle.normal.at(x, y, 1), bundle.normal.at(x, y, 2));
            const Vec3 v = cam.view_vector(x, y);
            const double c = n.dot(v);
            if (c < epsilon) {
                grad_distance.at(x, y) += g / epsilon;
                continue;
            }
            grad_distance.at(x, y) += g / c;
            const double dn = -g * bundle.distance.at(x, y) / (c * c);
            for (int k = 0; k < 3; ++k) grad_normal.at(x, y, k) += dn * v[k];
        }
}

namespace {

using Deriv = Eigen::Matrix<double, 10, 1>;
using AD = Eigen::AutoDiffScalar<Deriv>;

constexpr std::size_t kBlock = 64;

} // namespace

void backpropagate_render(const SceneFile& scene, const RasterContext& ctx, const PixelGradients& pixel_grads,
                          std::span<double> grad, std::span<double> screen_grad) {
    const std::size_t n = scene.size();
    const ParamLayout layout = layout_for(scene);
    const std::vector<ScreenGradient> sg = rasterize_backward(ctx, pixel_grads, n);

    std::vector<int> visible_of(n, -1);
    for (std::size_t v = 0; v < ctx.visible.size(); ++v) visible_of[ctx.visible[v].proj.index] = static_cast<int>(v);

    // Bank gradients are shared; each block of Gaussians gets its own buffer
    // and the buffers are summed in block order.
    const std::size_t blocks = (n + kBlock - 1) / kBlock;
    const std::size_t bank_size = scene.bank.param_count();
    std::vector<std::vector<double>> bank_grads(blocks);
    const double dilation = ctx.settings.projection.dilation;

    parallel_for(blocks, ctx.settings.threads, [&](std::size_t b) {
        if (ctx.stage == 2) bank_grads[b].assign(bank_size, 0.0);
        const std::size_t end = std::min(n, (b + 1) * kBlock);
        std::vector<Vec3> sh_grad;
        for (std::size_t i = b * kBlock; i < end; ++i) {
            if (visible_of[i] < 0) continue;
            const PreparedGaussian& pg = ctx.visible[visible_of[i]];
            const ScreenGradient& s = sg[i];
            const Gaussian& g = scene.gaussians[i];
            const ActivatedGaussian a = activate(g);
            double* out = grad.data() + i * layout.stride();

            if (!screen_grad.empty()) screen_grad[i] += s.mean.norm();

            out[ParamLayout::kOpacity] += s.opacity * a.opacity * (1.0 - a.opacity);
            out[layout.transparency_offset()] += s.transparency * a.transparency * (1.0 - a.transparency);

            sh_grad.assign(layout.sh_count, Vec3::Zero());
            ColorGradients cg;
            cg.sh = sh_grad;
            cg.amplitudes = std::span<double>(out + layout.amplitude_offset(), layout.amplitude_count);
            if (ctx.stage == 2) cg.bank = bank_grads[b];
            full_color_backward(a.sh, a.asg_amplitudes, ViewContext{pg.view_dir, pg.proj.normal}, ctx.stage,
                                scene.bank, s.color, cg);
            for (int k = 0; k < layout.sh_count; ++k)
                for (int c = 0; c < 3; ++c) out[ParamLayout::kSh + 3 * k + c] += sh_grad[k][c];

            detail::V3<AD> center;
            Eigen::Matrix<AD, 4, 1> quat;
            detail::V3<AD> log_scale;
            for (int k = 0; k < 3; ++k) center[k] = AD(g.center[k], 10, k);
            for (int k = 0; k < 4; ++k) quat[k] = AD(g.rotation[k], 10, 3 + k);
            for (int k = 0; k < 3; ++k) log_scale[k] = AD(g.log_scale[k], 10, 7 + k);
            const auto geo = detail::project_geometry<AD>(center, quat, log_scale, detail::min_scale_axis(g.log_scale),
                                                          ctx.camera, dilation);
            Deriv total = Deriv::Zero();
            total += s.mean.x() * geo.mean.x().derivatives() + s.mean.y() * geo.mean.y().derivatives();
            total += s.conic[0] * geo.conic_a.derivatives() + s.conic[1] * geo.conic_b.derivatives() +
                     s.conic[2] * geo.conic_c.derivatives();
            total += s.depth * geo.depth.derivatives() + s.distance * geo.distance.derivatives();
            const Vec3 g_normal = s.normal + cg.normal;
            for (int k = 0; k < 3; ++k) {
                total += g_normal[k] * geo.normal[k].derivatives();
                total += cg.view_dir[k] * geo.view_dir[k].derivatives();
            }
            for (int k = 0; k < 3; ++k) out[ParamLayout::kCenter + k] += total[k];
            for (int k = 0; k < 4; ++k) out[ParamLayout::kRotation + k] += total[3 + k];
            for (int k = 0; k < 3; ++k) out[ParamLayout::kScale + k] += total[7 + k];
        }
    });

    if (ctx.stage == 2) {
        double* bank = grad.data() + layout.bank_offset();
        for (const auto& bg : bank_grads)
            for (std::size_t k = 0; k < bg.size(); ++k) bank[k] += bg[k];
    }
}

ViewEvaluation evaluate_view(const SceneFile& scene, const TrainView& view, int stage, const LossWeights& weights,
                             const RenderSettings& settings, std::span<double> grad, std::span<double> screen_grad) {
    const bool want_grad = !grad.empty();
    const CameraView& cam = view.camera;
    const RasterContext ctx = prepare_view(scene, cam, stage, settings);
    const RenderBundle bundle = rasterize(ctx);

    ViewEvaluation ev;
    PixelGradients pg;
    const Image& reference = stage == 1 ? view.hybrid : view.gt;
    ev.parts.rgb = rgb_loss(bundle.color, reference, weights.lambda_r, want_grad ? &pg.color : nullptr);

    Image g_mask;
    ev.parts.transparency = transparency_loss(bundle.mask, view.mask, want_grad ? &g_mask : nullptr);

    Image g_prior;
    ev.parts.normal_prior = normal_prior_loss(bundle.normal, view.prior_normal, weights.theta_n,
                                              want_grad ? &g_prior : nullptr);

    const Image depth = unbiased_depth_map(bundle, cam, settings.plane_epsilon);
    ConsistencyGradient g_cons;
    ev.parts.consistency = depth_normal_consistency(depth, bundle.normal, cam, want_grad ? &g_cons : nullptr);

    std::vector<double> flat_grad;
    if (want_grad) flat_grad.assign(grad.size(), 0.0);
    ev.parts.flatten = flatten_loss(scene, flat_grad);
    ev.total = stage_total(stage, ev.parts, weights);
    if (!want_grad) return ev;

    pg.mask = g_mask;
    for (double& v : pg.mask.data()) v *= weights.lambda_t;
    pg.normal = Image(cam.width, cam.height, 3);
    pg.distance = Image(cam.width, cam.height, 1);
    backpropagate_unbiased_depth(bundle, cam, settings.plane_epsilon, g_cons.depth, pg.distance, pg.normal);
    for (std::size_t k = 0; k < pg.normal.data().size(); ++k)
        pg.normal.data()[k] = weights.lambda_n * (pg.normal.data()[k] + g_prior.data()[k] + g_cons.normal.data()[k]);
    for (double& v : pg.distance.data()) v *= weights.lambda_n;

    backpropagate_render(scene, ctx, pg, grad, screen_grad);
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += weights.lambda_f * flat_grad[k];
    return ev;
}

double evaluate_views(const SceneFile& scene, std::span<const TrainView> views, int stage, const LossWeights& weights,
                      const RenderSettings& settings, std::span<double> grad) {
    double total = 0.0;
    for (const auto& v : views) total += evaluate_view(scene, v, stage, weights, settings, grad).total;
    return total;
}

} // namespace splatgeo
