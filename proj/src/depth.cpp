#include "splatgeo/depth.hpp"

#include "splatgeo/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace splatgeo {

void WindowSearchConfig::validate() const {
    if (!(window > 0.0)) throw Error(ErrorCode::InvalidConfig, "depth window must be positive");
    if (!(t_end < t_start)) throw Error(ErrorCode::InvalidConfig, "t_end must be below t_start");
    if (t_start > 1.0 || t_end < 0.0) throw Error(ErrorCode::InvalidConfig, "transmittance band must lie in [0, 1]");
    if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidConfig, "depth epsilon must be positive");
}

double plane_depth(const Vec3& normal, double distance, const Vec3& view, double epsilon, bool* grazing) {
    const double c = normal.dot(view);
    if (grazing) *grazing = c < epsilon;
    return distance / std::max(c, epsilon);
}

double unbiased_depth(double distance, const Vec3& normal, const Vec3& view, double alpha, double epsilon) {
    if (!(alpha > 0.0)) return 0.0;
    return distance / std::max(normal.dot(view), epsilon);
}

double nearest_depth(std::span<const SplatFragment> fragments) {
    if (fragments.empty()) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& f : fragments) best = std::min(best, f.plane_depth);
    return best;
}

FirstSurface first_surface_depth(std::span<const SplatFragment> fragments, const WindowSearchConfig& cfg) {
    FirstSurface out;
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < fragments.size(); ++i) {
        const double t = fragments[i].transmittance;
        if (t >= cfg.t_end && t <= cfg.t_start) cand.push_back(i);
    }
    if (cand.empty()) return out;

    std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
        return fragments[a].plane_depth < fragments[b].plane_depth;
    });
    const std::size_t n = cand.size();
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const auto& f = fragments[cand[k]];
        prefix[k + 1] = prefix[k] + f.transmittance * f.alpha;
    }

    // Two-pointer sweep. Anchors sharing a depth share the window, whose left
    // end is the first of the run.
    std::vector<double> approx(n);
    std::vector<std::size_t> left(n), right(n);
    std::size_t lo = 0, hi = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double a = fragments[cand[k]].plane_depth;
        if (k == 0 || a != fragments[cand[k - 1]].plane_depth) lo = k;
        hi = std::max(hi, k);
        while (hi < n && fragments[cand[hi]].plane_depth < a + cfg.window) ++hi;
        left[k] = lo;
        right[k] = hi;
        approx[k] = prefix[hi] - prefix[lo];
    }
    const double best_approx = *std::max_element(approx.begin(), approx.end());

    // Prefix differences round differently from a direct sum; re-sum every
    // anchor that could be the maximum in fragment order.
    const double slack = 1e-9 * std::max(1.0, std::abs(best_approx));
    std::vector<std::size_t> members;
    bool have = false;
    for (std::size_t k = 0; k < n; ++k) {
        if (approx[k] < best_approx - slack) continue;
        if (k > 0 && left[k] == left[k - 1]) continue; // same window as previous anchor
        members.assign(cand.begin() + left[k], cand.begin() + right[k]);
        std::sort(members.begin(), members.end());
        double w = 0.0, wd = 0.0;
        for (const std::size_t i : members) {
            const auto& f = fragments[i];
            const double wi = f.transmittance * f.alpha;
            w += wi;
            wd += wi * f.plane_depth;
        }
        if (!have || w > out.weight) {
            have = true;
            out.found = true;
            out.weight = w;
            out.depth = wd / w;
            out.anchor = fragments[cand[k]].plane_depth;
            out.anchor_index = cand[left[k]];
            out.count = members.size();
        }
    }
    return out;
}

Image unbiased_depth_map(const RenderBundle& bundle, const CameraView& cam, double epsilon) {
    const int w = cam.width, h = cam.height;
    Image out(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const Vec3 n(bundle.normal.at(x, y, 0), bundle.normal.at(x, y, 1), bundle.normal.at(x, y, 2));
            out.at(x, y) = unbiased_depth(bundle.distance.at(x, y), n, cam.view_vector(x, y), bundle.alpha.at(x, y), epsilon);
        }
    return out;
}

DepthMaps extract_depths(const RenderBundle& bundle, const CameraView& cam, const WindowSearchConfig& cfg) {
    if (bundle.fragments.empty())
        throw Error(ErrorCode::InvalidArgument, "depth extraction needs a render with retained fragments");
    const int w = cam.width, h = cam.height;
    DepthMaps maps;
    maps.standard = bundle.depth_standard;
    maps.unbiased = unbiased_depth_map(bundle, cam, cfg.epsilon);
    maps.nearest = Image(w, h, 1);
    maps.first = maps.unbiased;
    maps.mask = bundle.mask;
    maps.fallback = Image(w, h, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const auto frags = bundle.fragments.pixel(x, y);
            maps.nearest.at(x, y) = nearest_depth(frags);
            if (bundle.mask.at(x, y) < cfg.mask_gate) continue;
            const FirstSurface fs = first_surface_depth(frags, cfg);
            if (fs.found)
                maps.first.at(x, y) = fs.depth;
            else
                maps.fallback.at(x, y) = 1.0;
        }
    }
    return maps;
}

DepthMaps extract_all(const SceneFile& scene, const CameraView& cam, const WindowSearchConfig& cfg,
                      RenderSettings settings) {
    cfg.validate();
    settings.keep_fragments = true;
    settings.plane_epsilon = cfg.epsilon;
    return extract_depths(render_view(scene, cam, 1, settings), cam, cfg);
}

} // namespace splatgeo
