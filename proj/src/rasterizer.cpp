#include "splatgeo/rasterizer.hpp"

#include "splatgeo/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace splatgeo {

bool Compositor::add(SplatFragment& f) {
    const double next = t_ * (1.0 - f.alpha);
    if (next < t_min_) return false;
    f.transmittance = t_;
    const double w = t_ * f.alpha;
    out_.color += w * f.color;
    out_.depth += w * f.depth;
    out_.normal += w * f.normal;
    out_.distance += w * f.distance;
    out_.alpha += w;
    if (t_ >= theta_t_) out_.mask = f.transparency;
    t_ = next;
    out_.transmittance = t_;
    return true;
}

double fragment_alpha(const ProjectedGaussian& pg, const Vec2& pixel, double opacity, const RenderSettings& settings) {
    const Vec2 d = pixel - pg.mean;
    const double power = -0.5 * (pg.conic[0] * d.x() * d.x() + pg.conic[2] * d.y() * d.y()) - pg.conic[1] * d.x() * d.y();
    if (power > 0.0) return 0.0;
    const double alpha = std::min(settings.alpha_max, opacity * std::exp(power));
    return alpha < settings.alpha_min ? 0.0 : alpha;
}

PixelOutputs composite(std::vector<SplatFragment>& fragments, double t_min, double theta_t) {
    Compositor comp(t_min, theta_t);
    std::size_t used = 0;
    for (; used < fragments.size(); ++used)
        if (!comp.add(fragments[used])) break;
    fragments.resize(used);
    return comp.outputs();
}

double render_transparency_mask(std::span<const SplatFragment> fragments, double theta_t) {
    double mask = 0.0;
    for (const auto& f : fragments) {
        if (f.transmittance < theta_t) break;
        mask = f.transparency;
    }
    return mask;
}

namespace {

// Orders Gaussians with equal depth by their stored values so the result does
// not depend on record order.
bool stored_less(const Gaussian& a, const Gaussian& b) {
    auto cmp = [](auto first_a, auto last_a, auto first_b, auto last_b) {
        return std::lexicographical_compare(first_a, last_a, first_b, last_b);
    };
    auto block = [](const Gaussian& g) {
        std::vector<double> v;
        v.reserve(12);
        v.insert(v.end(), g.center.data(), g.center.data() + 3);
        v.insert(v.end(), g.rotation.data(), g.rotation.data() + 4);
        v.insert(v.end(), g.log_scale.data(), g.log_scale.data() + 3);
        v.push_back(g.opacity_logit);
        v.push_back(g.transparency_logit);
        return v;
    };
    const auto va = block(a), vb = block(b);
    if (va != vb) return cmp(va.begin(), va.end(), vb.begin(), vb.end());
    std::vector<double> sa, sb;
    for (const auto& c : a.sh) sa.insert(sa.end(), c.data(), c.data() + 3);
    for (const auto& c : b.sh) sb.insert(sb.end(), c.data(), c.data() + 3);
    if (sa != sb) return cmp(sa.begin(), sa.end(), sb.begin(), sb.end());
    return cmp(a.asg_amplitudes.begin(), a.asg_amplitudes.end(), b.asg_amplitudes.begin(), b.asg_amplitudes.end());
}

struct Hit {
    std::uint32_t slot; // position in the tile list
    double g;      // Gaussian falloff exp(power)
    double alpha;
    bool clamped;  // alpha hit alpha_max
    Vec2 delta;    // pixel - mean
};

// Walks one pixel front to back. Fragments and hits are appended when the
// pointers are non-null.
PixelOutputs shade_pixel(const RasterContext& ctx, const std::vector<std::uint32_t>& list, int x, int y,
                         std::vector<SplatFragment>* frags, std::vector<Hit>* hits) {
    const RenderSettings& s = ctx.settings;
    const Vec2 pixel(x + 0.5, y + 0.5);
    const Vec3 view = ctx.camera.view_vector(x, y);
    Compositor comp(s.t_min, s.theta_t);
    for (std::uint32_t slot = 0; slot < list.size(); ++slot) {
        const PreparedGaussian& pg = ctx.visible[list[slot]];
        const Vec2 d = pixel - pg.proj.mean;
        const Vec3& q = pg.proj.conic;
        const double power = -0.5 * (q[0] * d.x() * d.x() + q[2] * d.y() * d.y()) - q[1] * d.x() * d.y();
        if (power > 0.0 || power < pg.cull_power) continue;
        const double g = std::exp(power);
        const double raw = pg.opacity * g;
        const double alpha = std::min(s.alpha_max, raw);
        if (alpha < s.alpha_min) continue;

        SplatFragment f;
        f.alpha = alpha;
        f.depth = pg.proj.depth;
        f.color = pg.color;
        f.normal = pg.proj.normal;
        f.distance = pg.proj.distance;
        f.transparency = pg.transparency;
        f.index = pg.proj.index;
        const double cosine = pg.proj.normal.dot(view);
        f.grazing = cosine < s.plane_epsilon;
        f.plane_depth = pg.proj.distance / std::max(cosine, s.plane_epsilon);
        if (!comp.add(f)) break;
        if (frags) frags->push_back(f);
        if (hits) hits->push_back({slot, g, alpha, raw >= s.alpha_max, d});
    }
    return comp.outputs();
}

struct TileRect {
    int x0, y0, x1, y1;
};

TileRect tile_rect(const RasterContext& ctx, std::size_t tile) {
    const int ts = ctx.settings.tile_size;
    const int tx = static_cast<int>(tile % ctx.tiles_x);
    const int ty = static_cast<int>(tile / ctx.tiles_x);
    return {tx * ts, ty * ts, std::min(ctx.camera.width, (tx + 1) * ts), std::min(ctx.camera.height, (ty + 1) * ts)};
}

} // namespace

RasterContext prepare_view(const SceneFile& scene, const CameraView& cam, int stage, const RenderSettings& settings) {
    RasterContext ctx;
    ctx.camera = cam;
    ctx.stage = stage;
    ctx.settings = settings;
    const int ts = settings.tile_size;
    ctx.tiles_x = (cam.width + ts - 1) / ts;
    ctx.tiles_y = (cam.height + ts - 1) / ts;
    ctx.tile_lists.assign(static_cast<std::size_t>(ctx.tiles_x) * ctx.tiles_y, {});

    const std::size_t n = scene.size();
    std::vector<std::optional<PreparedGaussian>> slots(n);
    const Vec3 eye = cam.center();
    parallel_for(n, settings.threads, [&](std::size_t i) {
        const Gaussian& g = scene.gaussians[i];
        const ActivatedGaussian a = activate(g);
        auto proj = project(a, cam, settings.projection);
        if (!proj) return;
        proj->index = static_cast<std::uint32_t>(i);
        PreparedGaussian p;
        p.proj = *proj;
        p.opacity = a.opacity;
        // margin keeps the cut strictly inside the alpha_min test
        p.cull_power = std::log(settings.alpha_min / a.opacity) - 1e-6;
        p.transparency = a.transparency;
        p.view_dir = (a.center - eye).normalized();
        p.color = full_color(a.sh, a.asg_amplitudes, ViewContext{p.view_dir, p.proj.normal}, stage, scene.bank);
        slots[i] = p;
    });

    std::vector<std::uint32_t> order;
    order.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        if (slots[i]) order.push_back(static_cast<std::uint32_t>(i));
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        const double za = slots[a]->proj.depth, zb = slots[b]->proj.depth;
        if (za != zb) return za < zb;
        const Gaussian& ga = scene.gaussians[a];
        const Gaussian& gb = scene.gaussians[b];
        if (stored_less(ga, gb)) return true;
        if (stored_less(gb, ga)) return false;
        return a < b;
    });

    ctx.visible.reserve(order.size());
    for (const std::uint32_t i : order) ctx.visible.push_back(*slots[i]);

    for (std::uint32_t v = 0; v < ctx.visible.size(); ++v) {
        const ProjectedGaussian& p = ctx.visible[v].proj;
        const int x0 = std::max(0, static_cast<int>(std::floor((p.mean.x() - p.radius) / ts)));
        const int x1 = std::min(ctx.tiles_x - 1, static_cast<int>(std::floor((p.mean.x() + p.radius) / ts)));
        const int y0 = std::max(0, static_cast<int>(std::floor((p.mean.y() - p.radius) / ts)));
        const int y1 = std::min(ctx.tiles_y - 1, static_cast<int>(std::floor((p.mean.y() + p.radius) / ts)));
        for (int ty = y0; ty <= y1; ++ty)
            for (int tx = x0; tx <= x1; ++tx) ctx.tile_lists[static_cast<std::size_t>(ty) * ctx.tiles_x + tx].push_back(v);
    }
    return ctx;
}

RenderBundle rasterize(const RasterContext& ctx) {
    const int w = ctx.camera.width, h = ctx.camera.height;
    RenderBundle out;
    out.color = Image(w, h, 3);
    out.depth_standard = Image(w, h, 1);
    out.normal = Image(w, h, 3);
    out.distance = Image(w, h, 1);
    out.alpha = Image(w, h, 1);
    out.mask = Image(w, h, 1);
    if (ctx.settings.keep_fragments) out.fragments = FragmentBuffer(w, h);

    parallel_for(ctx.tile_lists.size(), ctx.settings.threads, [&](std::size_t tile) {
        const TileRect r = tile_rect(ctx, tile);
        const auto& list = ctx.tile_lists[tile];
        for (int y = r.y0; y < r.y1; ++y) {
            for (int x = r.x0; x < r.x1; ++x) {
                std::vector<SplatFragment>* frags = ctx.settings.keep_fragments ? &out.fragments.mutable_pixel(x, y) : nullptr;
                const PixelOutputs px = shade_pixel(ctx, list, x, y, frags, nullptr);
                for (int c = 0; c < 3; ++c) {
                    out.color.at(x, y, c) = px.color[c];
                    out.normal.at(x, y, c) = px.normal[c];
                }
                out.depth_standard.at(x, y) = px.depth;
                out.distance.at(x, y) = px.distance;
                out.alpha.at(x, y) = px.alpha;
                out.mask.at(x, y) = px.mask;
            }
        }
    });
    return out;
}

RenderBundle render_view(const SceneFile& scene, const CameraView& cam, int stage, const RenderSettings& settings) {
    return rasterize(prepare_view(scene, cam, stage, settings));
}

namespace {

double sample(const Image& img, int x, int y, int c = 0) { return img.empty() ? 0.0 : img.at(x, y, c); }

} // namespace

std::vector<ScreenGradient> rasterize_backward(const RasterContext& ctx, const PixelGradients& grads,
                                               std::size_t gaussian_count) {
    // Each tile accumulates into slots parallel to its own list; tiles are then
    // reduced in a fixed order so the sum does not depend on scheduling.
    std::vector<std::vector<ScreenGradient>> per_tile(ctx.tile_lists.size());
    parallel_for(ctx.tile_lists.size(), ctx.settings.threads, [&](std::size_t tile) {
        const auto& list = ctx.tile_lists[tile];
        if (list.empty()) return;
        auto& acc = per_tile[tile];
        acc.assign(list.size(), ScreenGradient{});
        const TileRect r = tile_rect(ctx, tile);
        std::vector<SplatFragment> frags;
        std::vector<Hit> hits;
        for (int y = r.y0; y < r.y1; ++y) {
            for (int x = r.x0; x < r.x1; ++x) {
                frags.clear();
                hits.clear();
                shade_pixel(ctx, list, x, y, &frags, &hits);
                if (frags.empty()) continue;

                Vec3 g_color, g_normal;
                for (int c = 0; c < 3; ++c) {
                    g_color[c] = sample(grads.color, x, y, c);
                    g_normal[c] = sample(grads.normal, x, y, c);
                }
                const double g_depth = sample(grads.depth_standard, x, y);
                const double g_dist = sample(grads.distance, x, y);
                const double g_alpha = sample(grads.alpha, x, y);
                const double g_mask = sample(grads.mask, x, y);

                int mask_owner = -1;
                for (std::size_t k = 0; k < frags.size(); ++k)
                    if (frags[k].transmittance >= ctx.settings.theta_t) mask_owner = static_cast<int>(k);
                if (mask_owner >= 0) acc[hits[mask_owner].slot].transparency += g_mask;

                double suffix = 0.0; // sum over later fragments of T_j alpha_j s_j
                for (std::size_t k = frags.size(); k-- > 0;) {
                    const SplatFragment& f = frags[k];
                    const Hit& hit = hits[k];
                    const double s = g_color.dot(f.color) + g_depth * f.depth + g_normal.dot(f.normal) +
                                     g_dist * f.distance + g_alpha;
                    const double w = f.transmittance * f.alpha;
                    ScreenGradient& sg = acc[hit.slot];
                    sg.color += w * g_color;
                    sg.depth += w * g_depth;
                    sg.normal += w * g_normal;
                    sg.distance += w * g_dist;

                    const double d_alpha = f.transmittance * s - suffix / (1.0 - f.alpha);
                    suffix += w * s;
                    if (hit.clamped) continue;
                    const PreparedGaussian& pg = ctx.visible[list[hit.slot]];
                    sg.opacity += d_alpha * hit.g;
                    const double d_power = d_alpha * hit.alpha;
                    const Vec3& q = pg.proj.conic;
                    const Vec2& d = hit.delta;
                    sg.conic += d_power * Vec3(-0.5 * d.x() * d.x(), -d.x() * d.y(), -0.5 * d.y() * d.y());
                    // power depends on mean through d = pixel - mean
                    sg.mean += d_power * Vec2(q[0] * d.x() + q[1] * d.y(), q[1] * d.x() + q[2] * d.y());
                }
            }
        }
    });

    std::vector<ScreenGradient> out(gaussian_count);
    for (std::size_t tile = 0; tile < ctx.tile_lists.size(); ++tile) {
        const auto& list = ctx.tile_lists[tile];
        const auto& acc = per_tile[tile];
        for (std::size_t k = 0; k < acc.size(); ++k) {
            ScreenGradient& o = out[ctx.visible[list[k]].proj.index];
            const ScreenGradient& a = acc[k];
            o.mean += a.mean;
            o.conic += a.conic;
            o.opacity += a.opacity;
            o.color += a.color;
            o.depth += a.depth;
            o.normal += a.normal;
            o.distance += a.distance;
            o.transparency += a.transparency;
        }
    }
    return out;
}

} // namespace splatgeo
