#pragma once

#include "splatgeo/image.hpp"
#include "splatgeo/rasterizer.hpp"

#include <cstddef>
#include <span>

namespace splatgeo {

struct WindowSearchConfig {
    double window = 0.003;    // metres
    double t_start = 0.95;
    double t_end = 0.05;
    double epsilon = 1e-4;    // floor on n.v
    double mask_gate = 0.5;   // pixels with mask >= gate use the window search

    // Throws InvalidConfig.
    void validate() const;
};

// d / max(n.v, eps). `view` points toward the camera with unit camera-z.
double plane_depth(const Vec3& normal, double distance, const Vec3& view, double epsilon, bool* grazing = nullptr);

// Blended distance over blended normal; 0 when nothing was hit.
double unbiased_depth(double distance, const Vec3& normal, const Vec3& view, double alpha, double epsilon);

// Smallest plane depth among the fragments, 0 for an empty list.
double nearest_depth(std::span<const SplatFragment> fragments);

struct FirstSurface {
    bool found = false;      // false when no fragment lies in the transmittance band
    double depth = 0.0;
    double weight = 0.0;     // sum of T alpha inside the chosen window
    double anchor = 0.0;     // window is [anchor, anchor + window)
    std::size_t anchor_index = 0; // fragment that anchors the window
    std::size_t count = 0;   // fragments inside the window
};

// Maximum-weight plane-depth window over fragments with t_end <= T <= t_start.
// Ties go to the smallest anchor.
FirstSurface first_surface_depth(std::span<const SplatFragment> fragments, const WindowSearchConfig& cfg);

struct DepthMaps {
    Image standard;
    Image unbiased;
    Image nearest;
    Image first;
    Image mask;      // rendered transparency mask used for gating
    Image fallback;  // 1 where a transparent pixel had no window candidates
};

DepthMaps extract_depths(const RenderBundle& bundle, const CameraView& cam, const WindowSearchConfig& cfg);
DepthMaps extract_all(const SceneFile& scene, const CameraView& cam, const WindowSearchConfig& cfg,
                      RenderSettings settings = {});

Image unbiased_depth_map(const RenderBundle& bundle, const CameraView& cam, double epsilon);

} // namespace splatgeo
