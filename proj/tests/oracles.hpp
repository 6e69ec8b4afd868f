#pragma once

// Brute-force reference implementations used by the unit and acceptance
// tests. Written from the definitions, deliberately without sharing code with
// the library.

#include "splatgeo/rasterizer.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using splatgeo::SplatFragment;
using splatgeo::Vec3;

struct Composite {
    Vec3 color = Vec3::Zero();
    Vec3 normal = Vec3::Zero();
    double depth = 0.0;
    double distance = 0.0;
    double alpha = 0.0;
    double mask = 0.0;
    double t_final = 1.0;
    std::size_t used = 0;
    std::vector<double> transmittance;
};

// T_i recomputed from scratch for every fragment as prod_{j<i} (1 - a_j).
inline Composite composite(const std::vector<SplatFragment>& f, double t_min, double theta_t) {
    Composite r;
    for (std::size_t i = 0; i < f.size(); ++i) {
        double t = 1.0;
        for (std::size_t j = 0; j < i; ++j) t *= 1.0 - f[j].alpha;
        if (t * (1.0 - f[i].alpha) < t_min) break;
        const double w = t * f[i].alpha;
        r.color += w * f[i].color;
        r.normal += w * f[i].normal;
        r.depth += w * f[i].depth;
        r.distance += w * f[i].distance;
        r.alpha += w;
        if (t >= theta_t) r.mask = f[i].transparency;
        r.transmittance.push_back(t);
        r.t_final = t * (1.0 - f[i].alpha);
        r.used = i + 1;
    }
    return r;
}

struct Window {
    bool found = false;
    double weight = 0.0;
    double depth = 0.0;
    double anchor = 0.0;
};

// Every candidate anchors [d_j, d_j + dt); members are summed in fragment
// order. Largest weight wins, ties to the smaller anchor depth.
inline Window first_surface(const std::vector<SplatFragment>& f, double dt, double t_start, double t_end) {
    Window best;
    auto candidate = [&](const SplatFragment& x) { return x.transmittance >= t_end && x.transmittance <= t_start; };
    for (const auto& anchor : f) {
        if (!candidate(anchor)) continue;
        const double a = anchor.plane_depth;
        double w = 0.0, wd = 0.0;
        for (const auto& m : f)
            if (candidate(m) && m.plane_depth >= a && m.plane_depth < a + dt) {
                w += m.transmittance * m.alpha;
                wd += m.transmittance * m.alpha * m.plane_depth;
            }
        if (!best.found || w > best.weight || (w == best.weight && a < best.anchor)) {
            best.found = true;
            best.weight = w;
            best.depth = wd / w;
            best.anchor = a;
        }
    }
    return best;
}

// Random depth-sorted fragment list with clustered plane depths (including
// exact duplicates) and transmittance filled by a running product.
inline std::vector<SplatFragment> random_fragments(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> centres(1 + rng() % 4);
    for (double& c : centres) c = 0.5 + 3.0 * u(rng);
    const double amp = 0.6 * u(rng) * u(rng);
    std::vector<SplatFragment> f(n);
    double t = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto& x = f[i];
        x.alpha = 0.002 + amp * u(rng);
        const double c = centres[rng() % centres.size()];
        x.plane_depth = (rng() % 5 == 0) ? c : c + 0.006 * (u(rng) - 0.5);
        x.depth = x.plane_depth;
        x.color = Vec3(u(rng), u(rng), u(rng));
        x.normal = Vec3(u(rng) - 0.5, u(rng) - 0.5, -1.0).normalized();
        x.distance = u(rng) * 3.0;
        x.transparency = u(rng);
        x.index = static_cast<std::uint32_t>(i);
        x.transmittance = t;
        t *= 1.0 - x.alpha;
    }
    return f;
}

} // namespace oracle
