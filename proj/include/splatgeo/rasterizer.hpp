#pragma once

#include "splatgeo/camera.hpp"
#include "splatgeo/image.hpp"
#include "splatgeo/projection.hpp"
#include "splatgeo/scene.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace splatgeo {

struct RenderSettings {
    ProjectionSettings projection;
    double alpha_min = 1.0 / 255.0;
    double alpha_max = 0.99;
    double t_min = 1e-4;
    double theta_t = 0.5;        // transmittance threshold of the mask render
    double plane_epsilon = 1e-4; // floor on n.v in the plane depth
    int tile_size = 16;
    int threads = 0;
    bool keep_fragments = false;
};

struct SplatFragment {
    double alpha = 0.0;
    double transmittance = 1.0; // T before this fragment
    double depth = 0.0;         // centre depth z
    double plane_depth = 0.0;
    Vec3 color = Vec3::Zero();
    Vec3 normal = Vec3::Zero();
    double distance = 0.0;
    double transparency = 0.0;
    std::uint32_t index = 0;
    bool grazing = false; // plane-depth denominator was clamped
};

struct PixelOutputs {
    Vec3 color = Vec3::Zero();
    double depth = 0.0;
    Vec3 normal = Vec3::Zero();
    double distance = 0.0;
    double alpha = 0.0;          // sum of T_i alpha_i
    double transmittance = 1.0;  // T after the last used fragment
    double mask = 0.0;
};

// Front-to-back accumulator shared by the renderer and composite().
class Compositor {
public:
    explicit Compositor(double t_min = 1e-4, double theta_t = 0.5) : t_min_(t_min), theta_t_(theta_t) {}

    // Sets f.transmittance and accumulates. Returns false, without using the
    // fragment, once it would push T below t_min.
    bool add(SplatFragment& f);
    const PixelOutputs& outputs() const { return out_; }

private:
    double t_min_;
    double theta_t_;
    double t_ = 1.0;
    PixelOutputs out_;
};

double fragment_alpha(const ProjectedGaussian& pg, const Vec2& pixel, double opacity,
                      const RenderSettings& settings = {});

// Composites a depth-sorted list in place: fills T_i and truncates the list
// at the early-stop point.
PixelOutputs composite(std::vector<SplatFragment>& fragments, double t_min = 1e-4, double theta_t = 0.5);

// tau of the deepest fragment with T >= theta_t, 0 if none.
double render_transparency_mask(std::span<const SplatFragment> fragments, double theta_t);

class FragmentBuffer {
public:
    FragmentBuffer() = default;
    FragmentBuffer(int width, int height) : width_(width), height_(height), pixels_(std::size_t(width) * height) {}

    bool empty() const { return pixels_.empty(); }
    int width() const { return width_; }
    int height() const { return height_; }
    std::span<const SplatFragment> pixel(int x, int y) const { return pixels_[std::size_t(y) * width_ + x]; }
    std::vector<SplatFragment>& mutable_pixel(int x, int y) { return pixels_[std::size_t(y) * width_ + x]; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::vector<SplatFragment>> pixels_;
};

struct RenderBundle {
    Image color;          // 3 channels
    Image depth_standard; // sum T alpha z
    Image normal;         // 3 channels, not renormalised
    Image distance;
    Image alpha;
    Image mask;
    FragmentBuffer fragments; // filled when keep_fragments is set
};

struct PreparedGaussian {
    ProjectedGaussian proj;
    double opacity = 0.0;
    double transparency = 0.0;
    Vec3 color = Vec3::Zero();
    Vec3 view_dir = Vec3::Zero();
    double cull_power = -std::numeric_limits<double>::infinity(); // below this exponent alpha is under alpha_min
};

// Everything computed once per (scene, view) before per-pixel work: visible
// Gaussians in global depth order and per-tile lists.
struct RasterContext {
    CameraView camera;
    int stage = 1;
    RenderSettings settings;
    std::vector<PreparedGaussian> visible;
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::vector<std::uint32_t>> tile_lists; // indices into visible
};

RasterContext prepare_view(const SceneFile& scene, const CameraView& cam, int stage,
                           const RenderSettings& settings = {});
RenderBundle rasterize(const RasterContext& ctx);
RenderBundle render_view(const SceneFile& scene, const CameraView& cam, int stage,
                         const RenderSettings& settings = {});

// Upstream gradients per output map. Empty images count as zero.
struct PixelGradients {
    Image color, depth_standard, normal, distance, alpha, mask;
};

// Gradient with respect to the screen-space quantities of one Gaussian.
struct ScreenGradient {
    Vec2 mean = Vec2::Zero();
    Vec3 conic = Vec3::Zero();
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
    double depth = 0.0;
    Vec3 normal = Vec3::Zero();
    double distance = 0.0;
    double transparency = 0.0;
};

// One entry per scene Gaussian (zero for culled ones). Deterministic for any
// thread count.
std::vector<ScreenGradient> rasterize_backward(const RasterContext& ctx, const PixelGradients& grads,
                                               std::size_t gaussian_count);

} // namespace splatgeo
