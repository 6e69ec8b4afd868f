#include "splatgeo/losses.hpp"

#include "splatgeo/error.hpp"
#include "splatgeo/image_quality.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace splatgeo {

Image hybrid_delight(const Image& gt, const Image& delit, const Image& mask) {
    require_same_shape(gt, delit, "hybrid_delight");
    if (mask.width() != gt.width() || mask.height() != gt.height() || mask.channels() != 1)
        throw Error(ErrorCode::ShapeMismatch, "hybrid_delight: mask must be single-channel and match the images");
    Image out(gt.width(), gt.height(), gt.channels());
    for (int y = 0; y < gt.height(); ++y)
        for (int x = 0; x < gt.width(); ++x) {
            const double m = mask.at(x, y);
            for (int c = 0; c < gt.channels(); ++c) out.at(x, y, c) = m * delit.at(x, y, c) + (1.0 - m) * gt.at(x, y, c);
        }
    return out;
}

double l1_loss(const Image& rendered, const Image& reference, Image* grad) {
    require_same_shape(rendered, reference, "l1_loss");
    const std::size_t n = rendered.data().size();
    if (grad) *grad = Image(rendered.width(), rendered.height(), rendered.channels());
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = rendered.data()[i] - reference.data()[i];
        sum += std::abs(d);
        if (grad) grad->data()[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / static_cast<double>(n);
    }
    return sum / static_cast<double>(n);
}

double rgb_loss(const Image& rendered, const Image& reference, double lambda_r, Image* grad) {
    Image g_l1;
    const double l1 = l1_loss(rendered, reference, grad ? &g_l1 : nullptr);
    if (lambda_r == 0.0) {
        if (grad) *grad = g_l1;
        return l1;
    }
    double s;
    if (grad) {
        Image g_ssim;
        s = ssim_backward(rendered, reference, g_ssim);
        *grad = Image(rendered.width(), rendered.height(), rendered.channels());
        for (std::size_t i = 0; i < grad->data().size(); ++i)
            grad->data()[i] = (1.0 - lambda_r) * g_l1.data()[i] - lambda_r * g_ssim.data()[i];
    } else {
        s = ssim(rendered, reference);
    }
    return (1.0 - lambda_r) * l1 + lambda_r * (1.0 - s);
}

double transparency_loss(const Image& predicted, const Image& target, Image* grad) {
    require_same_shape(predicted, target, "transparency_loss");
    const std::size_t n = predicted.data().size();
    if (grad) *grad = Image(predicted.width(), predicted.height(), predicted.channels());
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double raw = predicted.data()[i];
        const double p = std::clamp(raw, kBceEpsilon, 1.0 - kBceEpsilon);
        const double y = target.data()[i];
        sum -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        if (grad && raw > kBceEpsilon && raw < 1.0 - kBceEpsilon)
            grad->data()[i] = (p - y) / (p * (1.0 - p)) / static_cast<double>(n);
    }
    return sum / static_cast<double>(n);
}

double normal_prior_loss(const Image& rendered, const Image& prior, double theta_n, Image* grad) {
    require_same_shape(rendered, prior, "normal_prior_loss");
    const int w = rendered.width(), h = rendered.height();
    if (grad) *grad = Image(w, h, 3);
    double sum = 0.0;
    std::size_t valid = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const Vec3 np(prior.at(x, y, 0), prior.at(x, y, 1), prior.at(x, y, 2));
            if (np.squaredNorm() == 0.0) continue;
            ++valid;
        }
    if (valid == 0) return 0.0;
    const double inv = 1.0 / static_cast<double>(valid);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            Vec3 np(prior.at(x, y, 0), prior.at(x, y, 1), prior.at(x, y, 2));
            if (np.squaredNorm() == 0.0) continue;
            np.normalize();
            const Vec3 nr(rendered.at(x, y, 0), rendered.at(x, y, 1), rendered.at(x, y, 2));
            const double dot = np.dot(nr);
            if (dot < theta_n) continue;
            sum += 1.0 - dot;
            if (grad)
                for (int c = 0; c < 3; ++c) grad->at(x, y, c) = -np[c] * inv;
        }
    return sum * inv;
}

namespace {

struct DepthNormalPixel {
    bool valid = false;
    Vec3 dx, dy, u, n;
};

DepthNormalPixel depth_normal_at(const Image& depth, const CameraView& cam, int x, int y) {
    DepthNormalPixel p;
    const int w = depth.width(), h = depth.height();
    if (x < 1 || y < 1 || x >= w - 1 || y >= h - 1) return p;
    const double dc = depth.at(x, y), dl = depth.at(x - 1, y), dr = depth.at(x + 1, y);
    const double du = depth.at(x, y - 1), dd = depth.at(x, y + 1);
    if (!(dc > 0.0 && dl > 0.0 && dr > 0.0 && du > 0.0 && dd > 0.0)) return p;
    // The camera centre cancels in the differences.
    p.dx = dr * cam.pixel_ray(x + 1, y) - dl * cam.pixel_ray(x - 1, y);
    p.dy = dd * cam.pixel_ray(x, y + 1) - du * cam.pixel_ray(x, y - 1);
    p.u = p.dy.cross(p.dx);
    const double len = p.u.norm();
    if (!(len > 0.0)) return p;
    p.n = p.u / len;
    p.valid = true;
    return p;
}

} // namespace

Image depth_to_normal(const Image& depth, const CameraView& cam) {
    Image out(depth.width(), depth.height(), 3);
    for (int y = 0; y < depth.height(); ++y)
        for (int x = 0; x < depth.width(); ++x) {
            const auto p = depth_normal_at(depth, cam, x, y);
            if (!p.valid) continue;
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = p.n[c];
        }
    return out;
}

double depth_normal_consistency(const Image& depth, const Image& rendered_normal, const CameraView& cam,
                                ConsistencyGradient* grad) {
    const int w = depth.width(), h = depth.height();
    if (rendered_normal.width() != w || rendered_normal.height() != h || rendered_normal.channels() != 3 ||
        depth.channels() != 1)
        throw Error(ErrorCode::ShapeMismatch, "depth_normal_consistency: depth and normal maps differ in shape");
    std::vector<DepthNormalPixel> pix(static_cast<std::size_t>(w) * h);
    std::size_t valid = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            auto& p = pix[static_cast<std::size_t>(y) * w + x];
            p = depth_normal_at(depth, cam, x, y);
            if (p.valid) ++valid;
        }
    if (grad) {
        grad->depth = Image(w, h, 1);
        grad->normal = Image(w, h, 3);
    }
    if (valid == 0) return 0.0;
    const double inv = 1.0 / static_cast<double>(valid);
    double sum = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const auto& p = pix[static_cast<std::size_t>(y) * w + x];
            if (!p.valid) continue;
            const Vec3 nr(rendered_normal.at(x, y, 0), rendered_normal.at(x, y, 1), rendered_normal.at(x, y, 2));
            sum += 1.0 - p.n.dot(nr);
            if (!grad) continue;
            for (int c = 0; c < 3; ++c) grad->normal.at(x, y, c) = -p.n[c] * inv;
            const Vec3 g_n = -nr * inv;
            const Vec3 g_u = (g_n - p.n * p.n.dot(g_n)) / p.u.norm();
            // u = dy x dx
            const Vec3 g_dy = p.dx.cross(g_u);
            const Vec3 g_dx = g_u.cross(p.dy);
            grad->depth.at(x + 1, y) += g_dx.dot(cam.pixel_ray(x + 1, y));
            grad->depth.at(x - 1, y) -= g_dx.dot(cam.pixel_ray(x - 1, y));
            grad->depth.at(x, y + 1) += g_dy.dot(cam.pixel_ray(x, y + 1));
            grad->depth.at(x, y - 1) -= g_dy.dot(cam.pixel_ray(x, y - 1));
        }
    return sum * inv;
}

double flatten_loss(const SceneFile& scene, std::span<double> grad) {
    const ParamLayout layout = layout_for(scene);
    double sum = 0.0;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const Vec3& ls = scene.gaussians[i].log_scale;
        int axis = 0;
        for (int k = 1; k < 3; ++k)
            if (ls[k] < ls[axis]) axis = k;
        const double s = std::exp(ls[axis]);
        sum += s;
        if (!grad.empty()) grad[i * layout.stride() + ParamLayout::kScale + axis] += s;
    }
    return sum;
}

double stage_total(int stage, const LossParts& parts, const LossWeights& weights) {
    if (stage != 1 && stage != 2) throw Error(ErrorCode::InvalidArgument, "stage must be 1 or 2");
    const std::pair<const char*, double> named[] = {{"rgb", parts.rgb},
                                                    {"transparency", parts.transparency},
                                                    {"normal_prior", parts.normal_prior},
                                                    {"consistency", parts.consistency},
                                                    {"flatten", parts.flatten}};
    for (const auto& [name, value] : named)
        if (!std::isfinite(value)) throw Error(ErrorCode::NonfinitePart, std::string("loss term '") + name + "' is not finite");
    return parts.rgb + weights.lambda_t * parts.transparency +
           weights.lambda_n * (parts.normal_prior + parts.consistency) + weights.lambda_f * parts.flatten;
}

} // namespace splatgeo
