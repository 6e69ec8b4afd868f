#pragma once

#include "splatgeo/camera.hpp"
#include "splatgeo/depth.hpp"
#include "splatgeo/image.hpp"
#include "splatgeo/mesh.hpp"
#include "splatgeo/rasterizer.hpp"
#include "splatgeo/scene.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace splatgeo {

enum class Scenario { PlateOverWall, Sphere, OpaqueWall, FloaterField };

const char* to_string(Scenario s);
Scenario parse_scenario(std::string_view name); // throws InvalidSpec

// Additive specular lobe present in the captured images but not in the
// de-lighted ones: intensity * exp(sharpness * (r.L - 1)) on plate pixels,
// r the mirrored viewing ray and L the unit direction toward the light.
struct HighlightSpec {
    Vec3 light_dir{0.15, 0.1, -1.0};
    double intensity = 0.5;
    double sharpness = 30.0;
};

// All lengths in metres. The plate is the square |x|,|y| <= plate_size/2
// (shifted by the seeded offset) in the plane z = plate_depth, facing the
// cameras; the wall is a larger square at z = wall_depth.
struct SynthSpec {
    Scenario scenario = Scenario::PlateOverWall;

    double plate_depth = 1.0;
    double plate_size = 0.3;
    double plate_spacing = 0.0125;
    double plate_sigma = 1.0; // in-plane scale relative to the spacing
    double plate_opacity = 0.6; // composited plate weight
    double plate_transparency = 0.95;
    Vec3 plate_color{0.75, 0.85, 0.9};

    double wall_depth = 2.0;
    double wall_size = 3.4;
    double wall_spacing = 0.05;
    double wall_sigma = 1.0;
    double wall_splat_opacity = 0.95;
    double wall_transparency = 0.05;

    double floater_fraction = 0.05; // relative to the plate splat count
    double floater_opacity = 0.1;
    double floater_size = 0.002;
    double floater_near = 0.5;
    double floater_far = 0.9;

    double sphere_radius = 0.3;
    double sphere_spacing = 0.015;
    double orbit_distance = 1.2;

    int views = 8;
    double rig_radius = 0.25; // ring in the z = 0 plane; 0 puts every view on the axis
    int width = 128;
    int height = 128;
    double focal = 128.0;

    double init_depth_noise = 0.001; // std of the init scene's offset along each splat normal

    HighlightSpec highlight;
    SceneMeta meta{2, 8, 8, 4, 16, 1.0};
    std::uint64_t seed = 0;

    void validate() const; // throws InvalidSpec
};

// Per-view analytic ground truth plus the two image variants.
struct ViewTruth {
    CameraView camera;
    Image depth;  // camera z of the first real surface, 0 where the ray misses
    Image normal; // world, camera-facing
    Image mask;   // 1 on the plate footprint
    Image delit;  // I_D
    Image image;  // I_GT
};

struct GroundTruth {
    std::vector<ViewTruth> views;
    TriMesh mesh;
    // Region of interest used for fusion and evaluation.
    Vec3 roi_min = Vec3::Zero();
    Vec3 roi_max = Vec3::Zero();
    double plate_splat_opacity = 0.0;
    Vec2 plate_offset = Vec2::Zero();
};

struct SynthResult {
    SynthSpec spec;
    SceneFile scene; // ground-truth splats
    SceneFile init;  // perturbed starting point for training
    GroundTruth truth;
};

std::vector<CameraView> make_rig(const SynthSpec& spec);

// First analytic surface along origin + t * ray (ray scaled to unit camera z
// is fine; t is returned in the same units). Floaters are not surfaces.
struct AnalyticHit {
    bool hit = false;
    double t = 0.0;
    Vec3 normal = Vec3::Zero();
    bool plate = false;
};
AnalyticHit trace_truth(const SynthSpec& spec, const Vec2& plate_offset, const Vec3& origin, const Vec3& ray);

// Per-splat plate opacity that makes a fronto-parallel plate composite to
// `target` over its interior, found by bisection against the renderer.
double calibrate_plate_opacity(const SynthSpec& spec, double target, int threads = 0);

// Mean composited alpha of a plate-only scene over the plate interior, seen
// from the axis camera.
double plate_coverage(const SynthSpec& spec, double splat_opacity, int threads = 0);

SynthResult generate(const SynthSpec& spec, int threads = 0);

struct EstimatorError {
    std::string estimator;
    double mean_signed = 0.0;
    double mean_abs = 0.0;
    double max_abs = 0.0;
    std::size_t pixels = 0;
};

struct DilemmaReport {
    std::vector<EstimatorError> rows; // standard, unbiased, nearest, first
    const EstimatorError& row(std::string_view name) const;
    std::string to_csv() const;
};

// Errors of each depth estimator against the analytic depth over the plate
// footprint (every covered pixel when the scene has no plate).
DilemmaReport dilemma_report(const SceneFile& scene, const GroundTruth& truth, const WindowSearchConfig& cfg,
                             RenderSettings settings = {});

} // namespace splatgeo
