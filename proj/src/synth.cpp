#include "splatgeo/synth.hpp"

#include "splatgeo/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace splatgeo {

const char* to_string(Scenario s) {
    switch (s) {
    case Scenario::PlateOverWall: return "plate-over-wall";
    case Scenario::Sphere: return "sphere";
    case Scenario::OpaqueWall: return "opaque-wall";
    case Scenario::FloaterField: return "floater-field";
    }
    return "unknown";
}

Scenario parse_scenario(std::string_view name) {
    for (Scenario s : {Scenario::PlateOverWall, Scenario::Sphere, Scenario::OpaqueWall, Scenario::FloaterField})
        if (name == to_string(s)) return s;
    throw Error(ErrorCode::InvalidSpec, "unknown scenario '" + std::string(name) + "'");
}

namespace {

bool has_plate(Scenario s) { return s == Scenario::PlateOverWall || s == Scenario::FloaterField; }
bool has_wall(Scenario s) { return s != Scenario::Sphere; }

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::InvalidSpec, what);
}

bool open_unit(double v) { return v > 0.0 && v < 1.0; }

} // namespace

void SynthSpec::validate() const {
    require(views >= 1, "views must be >= 1");
    require(width > 0 && height > 0 && focal > 0.0, "image size and focal must be positive");
    require(plate_depth > 0.0 && plate_depth < wall_depth, "need 0 < plate_depth < wall_depth");
    require(open_unit(plate_opacity), "plate_opacity must lie in (0, 1)");
    require(open_unit(plate_transparency) && open_unit(wall_transparency), "transparencies must lie in (0, 1)");
    require(open_unit(wall_splat_opacity) && open_unit(floater_opacity), "opacities must lie in (0, 1)");
    require(plate_size > 0.0 && plate_spacing > 0.0 && plate_sigma > 0.0, "plate geometry must be positive");
    require(wall_size > 0.0 && wall_spacing > 0.0 && wall_sigma > 0.0, "wall geometry must be positive");
    require(floater_fraction >= 0.0 && floater_size > 0.0, "floater parameters must be positive");
    require(floater_near > 0.0 && floater_near <= floater_far && floater_far < plate_depth,
            "floaters must sit between the cameras and the plate");
    require(sphere_radius > 0.0 && sphere_spacing > 0.0 && orbit_distance > sphere_radius,
            "sphere rig must orbit outside the sphere");
    require(rig_radius >= 0.0 && rig_radius < plate_depth, "rig radius must be smaller than the plate depth");
    require(init_depth_noise >= 0.0, "init_depth_noise must be non-negative");
    require(highlight.light_dir.norm() > 0.0 && highlight.intensity >= 0.0 && highlight.sharpness >= 0.0,
            "invalid highlight");
    require(meta.sh_degree >= 0 && meta.sh_degree <= kMaxShDegree, "sh degree out of range");
}

namespace {

struct Layout {
    Vec2 offset = Vec2::Zero();
    double phase = 0.0;
    Vec2 wall_freq = Vec2::Zero();
    Vec3 wall_phase = Vec3::Zero();
};

Layout draw_layout(const SynthSpec& spec) {
    std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ULL + 17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Layout l;
    l.offset = Vec2(0.04 * (u(rng) - 0.5), 0.04 * (u(rng) - 0.5));
    l.phase = 2.0 * kPi * u(rng) / spec.views;
    l.wall_freq = Vec2(1.0 + u(rng), 1.0 + u(rng));
    l.wall_phase = Vec3(u(rng), u(rng), u(rng));
    return l;
}

Vec3 wall_color(const Layout& l, const Vec3& p) {
    Vec3 c;
    for (int k = 0; k < 3; ++k)
        c[k] = 0.45 + 0.2 * std::sin(2.0 * kPi * (l.wall_freq.x() * p.x() + l.wall_phase[k])) *
                          std::cos(2.0 * kPi * (l.wall_freq.y() * p.y() + 0.5 * l.wall_phase[k]));
    return c;
}

Gaussian splat(const SceneMeta& meta, const Vec3& center, const Mat3& frame, const Vec3& scale, double opacity,
               double transparency, const Vec3& color) {
    Gaussian g = make_gaussian(meta);
    g.center = center;
    const Eigen::Quaterniond q(frame);
    g.rotation = Vec4(q.w(), q.x(), q.y(), q.z());
    g.log_scale = scale.array().log();
    g.opacity_logit = logit(opacity);
    g.transparency_logit = logit(transparency);
    g.sh[0] = color / sh_const::C0;
    return g;
}

std::vector<double> grid_axis(double half, double spacing) {
    const int n = static_cast<int>(std::ceil(2.0 * half / spacing)) + 1;
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = (i - 0.5 * (n - 1)) * spacing;
    return out;
}

double plate_extent(const SynthSpec& spec) { return 0.5 * spec.plate_size + 2.0 * spec.plate_spacing; }

void add_plate(const SynthSpec& spec, const Vec2& offset, double opacity, SceneFile& scene) {
    const double s = spec.plate_sigma * spec.plate_spacing;
    const Vec3 scale(s, s, 1e-3 * spec.plate_spacing);
    const auto axis = grid_axis(plate_extent(spec), spec.plate_spacing);
    for (double y : axis)
        for (double x : axis)
            scene.gaussians.push_back(splat(scene.meta, Vec3(x + offset.x(), y + offset.y(), spec.plate_depth),
                                            Mat3::Identity(), scale, opacity, spec.plate_transparency,
                                            spec.plate_color));
}

void add_wall(const SynthSpec& spec, const Layout& l, SceneFile& scene) {
    const double s = spec.wall_sigma * spec.wall_spacing;
    const Vec3 scale(s, s, 1e-3 * spec.wall_spacing);
    const auto axis = grid_axis(0.5 * spec.wall_size, spec.wall_spacing);
    for (double y : axis)
        for (double x : axis) {
            const Vec3 p(x, y, spec.wall_depth);
            scene.gaussians.push_back(splat(scene.meta, p, Mat3::Identity(), scale, spec.wall_splat_opacity,
                                            spec.wall_transparency, wall_color(l, p)));
        }
}

std::size_t plate_splat_count(const SynthSpec& spec) {
    const std::size_t n = grid_axis(plate_extent(spec), spec.plate_spacing).size();
    return n * n;
}

void add_floaters(const SynthSpec& spec, const Vec2& offset, SceneFile& scene) {
    const auto count = static_cast<std::size_t>(std::llround(spec.floater_fraction * plate_splat_count(spec)));
    std::mt19937_64 rng(spec.seed * 0xD1B54A32D192ED03ULL + 5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double half = 0.5 * spec.plate_size;
    const Vec3 scale(spec.floater_size, spec.floater_size, 0.5 * spec.floater_size);
    for (std::size_t i = 0; i < count; ++i) {
        const Vec3 on_plate(offset.x() + half * (2.0 * u(rng) - 1.0), offset.y() + half * (2.0 * u(rng) - 1.0),
                            spec.plate_depth);
        const double z = spec.floater_near + (spec.floater_far - spec.floater_near) * u(rng);
        scene.gaussians.push_back(splat(scene.meta, on_plate * (z / spec.plate_depth), Mat3::Identity(), scale,
                                        spec.floater_opacity, 0.5, Vec3(0.5, 0.5, 0.5)));
    }
}

std::vector<Vec3> fibonacci_directions(std::size_t n) {
    std::vector<Vec3> out(n);
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < n; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / static_cast<double>(n);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        out[i] = Vec3(r * std::cos(golden * i), r * std::sin(golden * i), z);
    }
    return out;
}

Mat3 frame_with_normal(const Vec3& n) {
    const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 t1 = n.cross(helper).normalized();
    const Vec3 t2 = n.cross(t1);
    Mat3 f;
    f.col(0) = t1;
    f.col(1) = t2;
    f.col(2) = n;
    return f;
}

void add_sphere(const SynthSpec& spec, SceneFile& scene) {
    const double r = spec.sphere_radius;
    const auto n = static_cast<std::size_t>(std::ceil(4.0 * kPi * r * r / (spec.sphere_spacing * spec.sphere_spacing)));
    const double s = spec.sphere_spacing;
    for (const Vec3& d : fibonacci_directions(n)) {
        const Vec3 color = (Vec3::Constant(0.5) + 0.3 * d).cwiseMax(0.05);
        scene.gaussians.push_back(splat(scene.meta, r * d, frame_with_normal(d), Vec3(s, s, 1e-3 * s), 0.9,
                                        spec.wall_transparency, color));
    }
}

CameraView axis_camera(const SynthSpec& spec, const Vec2& offset) {
    return make_look_at_camera(Vec3::Zero(), Vec3(offset.x(), offset.y(), spec.plate_depth), Vec3(0.0, -1.0, 0.0),
                               spec.focal, spec.width, spec.height);
}

std::vector<CameraView> rig_for(const SynthSpec& spec, const Layout& l) {
    std::vector<CameraView> cams;
    if (spec.scenario == Scenario::Sphere) {
        for (const Vec3& d : fibonacci_directions(spec.views)) {
            const Vec3 up = std::abs(d.y()) > 0.99 ? Vec3::UnitZ() : Vec3(0.0, -1.0, 0.0);
            cams.push_back(make_look_at_camera(spec.orbit_distance * d, Vec3::Zero(), up, spec.focal, spec.width,
                                               spec.height));
        }
        return cams;
    }
    const Vec3 target(l.offset.x(), l.offset.y(), spec.plate_depth);
    for (int k = 0; k < spec.views; ++k) {
        const double a = l.phase + 2.0 * kPi * k / spec.views;
        const Vec3 eye(spec.rig_radius * std::cos(a), spec.rig_radius * std::sin(a), 0.0);
        // The bare wall is viewed head-on so its depth is the same at every pixel.
        const Vec3 look = spec.scenario == Scenario::OpaqueWall ? Vec3(eye + Vec3::UnitZ()) : target;
        cams.push_back(make_look_at_camera(eye, look, Vec3(0.0, -1.0, 0.0), spec.focal, spec.width, spec.height));
    }
    return cams;
}

double highlight_at(const HighlightSpec& h, const Vec3& ray, const Vec3& normal) {
    const Vec3 d = ray.normalized();
    const Vec3 r = d - 2.0 * d.dot(normal) * normal;
    return h.intensity * std::exp(h.sharpness * (r.dot(h.light_dir.normalized()) - 1.0));
}

} // namespace

std::vector<CameraView> make_rig(const SynthSpec& spec) {
    spec.validate();
    return rig_for(spec, draw_layout(spec));
}

AnalyticHit trace_truth(const SynthSpec& spec, const Vec2& offset, const Vec3& origin, const Vec3& ray) {
    AnalyticHit best;
    best.t = std::numeric_limits<double>::infinity();
    auto consider = [&](double t, const Vec3& n, bool plate) {
        if (t > 0.0 && t < best.t) {
            best.hit = true;
            best.t = t;
            best.normal = n.dot(ray) > 0.0 ? Vec3(-n) : n;
            best.plate = plate;
        }
    };
    auto square = [&](double depth, const Vec2& c, double half, bool plate) {
        if (std::abs(ray.z()) < 1e-15) return;
        const double t = (depth - origin.z()) / ray.z();
        const Vec3 p = origin + t * ray;
        if (std::abs(p.x() - c.x()) <= half && std::abs(p.y() - c.y()) <= half) consider(t, Vec3::UnitZ(), plate);
    };
    if (has_plate(spec.scenario)) square(spec.plate_depth, offset, 0.5 * spec.plate_size, true);
    if (has_wall(spec.scenario)) square(spec.wall_depth, Vec2::Zero(), 0.5 * spec.wall_size, false);
    if (spec.scenario == Scenario::Sphere) {
        const double a = ray.squaredNorm();
        const double b = 2.0 * origin.dot(ray);
        const double c = origin.squaredNorm() - spec.sphere_radius * spec.sphere_radius;
        const double disc = b * b - 4.0 * a * c;
        if (disc >= 0.0) {
            const double t = (-b - std::sqrt(disc)) / (2.0 * a);
            consider(t, (origin + t * ray).normalized(), false);
        }
    }
    if (!best.hit) best.t = 0.0;
    return best;
}

double plate_coverage(const SynthSpec& spec, double splat_opacity, int threads) {
    SceneFile scene = make_empty_scene(spec.meta);
    add_plate(spec, Vec2::Zero(), splat_opacity, scene);
    const CameraView cam = axis_camera(spec, Vec2::Zero());
    RenderSettings rs;
    rs.threads = threads;
    const RenderBundle b = render_view(scene, cam, 1, rs);
    const double inner = 0.5 * spec.plate_size - spec.plate_spacing;
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const Vec3 p = cam.center() + spec.plate_depth * cam.pixel_ray(x, y);
            if (std::abs(p.x()) > inner || std::abs(p.y()) > inner) continue;
            sum += b.alpha.at(x, y);
            ++n;
        }
    if (n == 0) throw Error(ErrorCode::InvalidSpec, "plate interior covers no pixels");
    return sum / static_cast<double>(n);
}

double calibrate_plate_opacity(const SynthSpec& spec, double target, int threads) {
    double lo = logit(1e-4), hi = logit(0.99);
    if (plate_coverage(spec, sigmoid(hi), threads) < target)
        throw Error(ErrorCode::InvalidSpec, "plate opacity target is out of reach for this splat layout");
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        (plate_coverage(spec, sigmoid(mid), threads) < target ? lo : hi) = mid;
    }
    return sigmoid(0.5 * (lo + hi));
}

SynthResult generate(const SynthSpec& spec, int threads) {
    spec.validate();
    const Layout layout = draw_layout(spec);
    SynthResult out;
    out.spec = spec;
    out.truth.plate_offset = layout.offset;
    out.scene = make_empty_scene(spec.meta);

    if (has_plate(spec.scenario)) {
        out.truth.plate_splat_opacity = calibrate_plate_opacity(spec, spec.plate_opacity, threads);
        add_plate(spec, layout.offset, out.truth.plate_splat_opacity, out.scene);
    }
    if (spec.scenario == Scenario::FloaterField) add_floaters(spec, layout.offset, out.scene);
    if (has_wall(spec.scenario)) add_wall(spec, layout, out.scene);
    if (spec.scenario == Scenario::Sphere) add_sphere(spec, out.scene);
    round_to_storage(out.scene);

    // Ground-truth mesh and the region fused and scored.
    const double gt_spacing = 0.002;
    const double margin = 0.03;
    if (has_plate(spec.scenario)) {
        const Vec3 c(layout.offset.x(), layout.offset.y(), spec.plate_depth);
        const double half = 0.5 * spec.plate_size;
        out.truth.mesh = make_rectangle_mesh(c, half, half, gt_spacing);
        out.truth.roi_min = c - Vec3(half + margin, half + margin, 0.04);
        out.truth.roi_max = c + Vec3(half + margin, half + margin, 0.04);
    } else if (spec.scenario == Scenario::OpaqueWall) {
        const Vec3 c(0.0, 0.0, spec.wall_depth);
        const double half = 0.3;
        out.truth.mesh = make_rectangle_mesh(c, half, half, gt_spacing);
        out.truth.roi_min = c - Vec3(half, half, 0.04);
        out.truth.roi_max = c + Vec3(half, half, 0.04);
    } else {
        out.truth.mesh = make_sphere_mesh(Vec3::Zero(), spec.sphere_radius, gt_spacing);
        out.truth.roi_min = Vec3::Constant(-(spec.sphere_radius + margin));
        out.truth.roi_max = Vec3::Constant(spec.sphere_radius + margin);
    }

    RenderSettings rs;
    rs.threads = threads;
    for (const CameraView& cam : rig_for(spec, layout)) {
        ViewTruth v;
        v.camera = cam;
        v.depth = Image(cam.width, cam.height, 1);
        v.normal = Image(cam.width, cam.height, 3);
        v.mask = Image(cam.width, cam.height, 1);
        v.delit = render_view(out.scene, cam, 1, rs).color;
        v.image = v.delit;
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                const Vec3 ray = cam.pixel_ray(x, y);
                const AnalyticHit h = trace_truth(spec, layout.offset, cam.center(), ray);
                if (!h.hit) continue;
                v.depth.at(x, y) = h.t;
                for (int c = 0; c < 3; ++c) v.normal.at(x, y, c) = h.normal[c];
                if (!h.plate) continue;
                v.mask.at(x, y) = 1.0;
                const double s = highlight_at(spec.highlight, ray, h.normal);
                for (int c = 0; c < 3; ++c) v.image.at(x, y, c) = std::clamp(v.image.at(x, y, c) + s, 0.0, 1.0);
            }
        out.truth.views.push_back(std::move(v));
    }

    // Training start: the true layout, jittered, with flat appearance.
    out.init = out.scene;
    std::mt19937_64 rng(spec.seed * 0xA24BAED4963EE407ULL + 99);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> depth_noise(0.0, 1.0);
    for (Gaussian& g : out.init.gaussians) {
        const Mat3 r = activate(g).rotation.toRotationMatrix();
        const double lateral = 0.3 * std::exp(g.log_scale.x());
        g.center += lateral * (u(rng) * r.col(0) + u(rng) * r.col(1)) + spec.init_depth_noise * depth_noise(rng) * r.col(2);
        for (int k = 0; k < 3; ++k) g.log_scale[k] += 0.1 * u(rng);
        for (int k = 1; k < 4; ++k) g.rotation[k] += 0.05 * u(rng);
        g.opacity_logit = 0.0;
        g.transparency_logit = 0.0;
        std::fill(g.sh.begin(), g.sh.end(), Vec3::Zero());
        g.sh[0] = Vec3::Constant(0.5 / sh_const::C0);
        std::fill(g.asg_amplitudes.begin(), g.asg_amplitudes.end(), 0.0);
    }
    round_to_storage(out.init);
    return out;
}

const EstimatorError& DilemmaReport::row(std::string_view name) const {
    for (const auto& r : rows)
        if (r.estimator == name) return r;
    throw Error(ErrorCode::InvalidArgument, "no estimator named " + std::string(name));
}

std::string DilemmaReport::to_csv() const {
    std::ostringstream os;
    os.precision(9);
    os << "estimator,mean_signed,mean_abs,max_abs,pixels\n";
    for (const auto& r : rows)
        os << r.estimator << ',' << r.mean_signed << ',' << r.mean_abs << ',' << r.max_abs << ',' << r.pixels << '\n';
    return os.str();
}

DilemmaReport dilemma_report(const SceneFile& scene, const GroundTruth& truth, const WindowSearchConfig& cfg,
                             RenderSettings settings) {
    bool any_plate = false;
    for (const auto& v : truth.views)
        for (double m : v.mask.data()) any_plate = any_plate || m > 0.5;

    DilemmaReport report;
    for (const char* name : {"standard", "unbiased", "nearest", "first"}) report.rows.push_back({name});
    for (const auto& v : truth.views) {
        const DepthMaps maps = extract_all(scene, v.camera, cfg, settings);
        const Image* est[4] = {&maps.standard, &maps.unbiased, &maps.nearest, &maps.first};
        for (int y = 0; y < v.camera.height; ++y)
            for (int x = 0; x < v.camera.width; ++x) {
                const bool inside = any_plate ? v.mask.at(x, y) > 0.5 : v.depth.at(x, y) > 0.0;
                if (!inside) continue;
                for (int k = 0; k < 4; ++k) {
                    const double e = est[k]->at(x, y) - v.depth.at(x, y);
                    auto& r = report.rows[k];
                    r.mean_signed += e;
                    r.mean_abs += std::abs(e);
                    r.max_abs = std::max(r.max_abs, std::abs(e));
                    ++r.pixels;
                }
            }
    }
    for (auto& r : report.rows)
        if (r.pixels > 0) {
            r.mean_signed /= static_cast<double>(r.pixels);
            r.mean_abs /= static_cast<double>(r.pixels);
        }
    return report;
}

} // namespace splatgeo
