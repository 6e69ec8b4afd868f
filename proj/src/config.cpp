#include "splatgeo/config.hpp"

#include "splatgeo/error.hpp"

#include <fstream>

namespace splatgeo {

using nlohmann::json;

namespace {

// The single table of configurable fields. `f` is called with a dotted path
// and a reference to the field.
template <typename F>
void visit_fields(ToolkitConfig& c, F&& f) {
    f("threads", c.threads);
    f("seed", c.seed);

    auto& s = c.synth;
    f("synth.scenario", s.scenario);
    f("synth.plate_depth", s.plate_depth);
    f("synth.plate_size", s.plate_size);
    f("synth.plate_spacing", s.plate_spacing);
    f("synth.plate_sigma", s.plate_sigma);
    f("synth.plate_opacity", s.plate_opacity);
    f("synth.plate_transparency", s.plate_transparency);
    f("synth.plate_color", s.plate_color);
    f("synth.wall_depth", s.wall_depth);
    f("synth.wall_size", s.wall_size);
    f("synth.wall_spacing", s.wall_spacing);
    f("synth.wall_sigma", s.wall_sigma);
    f("synth.wall_splat_opacity", s.wall_splat_opacity);
    f("synth.wall_transparency", s.wall_transparency);
    f("synth.floater_fraction", s.floater_fraction);
    f("synth.floater_opacity", s.floater_opacity);
    f("synth.floater_size", s.floater_size);
    f("synth.floater_near", s.floater_near);
    f("synth.floater_far", s.floater_far);
    f("synth.sphere_radius", s.sphere_radius);
    f("synth.sphere_spacing", s.sphere_spacing);
    f("synth.orbit_distance", s.orbit_distance);
    f("synth.views", s.views);
    f("synth.rig_radius", s.rig_radius);
    f("synth.width", s.width);
    f("synth.height", s.height);
    f("synth.focal", s.focal);
    f("synth.init_depth_noise", s.init_depth_noise);
    f("synth.highlight.light_dir", s.highlight.light_dir);
    f("synth.highlight.intensity", s.highlight.intensity);
    f("synth.highlight.sharpness", s.highlight.sharpness);
    f("synth.meta.sh_degree", s.meta.sh_degree);
    f("synth.meta.asg_lobes", s.meta.asg_lobes);
    f("synth.meta.asg_features", s.meta.asg_features);
    f("synth.meta.pe_octaves", s.meta.pe_octaves);
    f("synth.meta.decoder_hidden", s.meta.decoder_hidden);

    auto& t = c.train;
    f("train.iters_stage1", t.iters_stage1);
    f("train.iters_stage2", t.iters_stage2);
    f("train.lr.center", t.lr.center);
    f("train.lr.center_final", t.lr.center_final);
    f("train.lr.rotation", t.lr.rotation);
    f("train.lr.scale", t.lr.scale);
    f("train.lr.opacity", t.lr.opacity);
    f("train.lr.sh_dc", t.lr.sh_dc);
    f("train.lr.sh_rest", t.lr.sh_rest);
    f("train.lr.transparency", t.lr.transparency);
    f("train.lr.amplitude", t.lr.amplitude);
    f("train.lr.bank", t.lr.bank);
    f("train.weights.lambda_r", t.weights.lambda_r);
    f("train.weights.lambda_t", t.weights.lambda_t);
    f("train.weights.lambda_n", t.weights.lambda_n);
    f("train.weights.lambda_f", t.weights.lambda_f);
    f("train.weights.theta_n", t.weights.theta_n);
    f("train.weights.theta_t", t.weights.theta_t);
    f("train.densify_interval", t.densify_interval);
    f("train.densify_threshold", t.densify_threshold);
    f("train.max_gaussians", t.max_gaussians);
    f("train.split_scale", t.split_scale);
    f("train.prune_opacity", t.prune_opacity);

    auto& r = c.train.render;
    f("render.near_plane", r.projection.near_plane);
    f("render.dilation", r.projection.dilation);
    f("render.footprint_sigma", r.projection.footprint_sigma);
    f("render.alpha_min", r.alpha_min);
    f("render.alpha_max", r.alpha_max);
    f("render.t_min", r.t_min);
    f("render.theta_t", r.theta_t);
    f("render.tile_size", r.tile_size);

    f("depth.window", c.depth.window);
    f("depth.t_start", c.depth.t_start);
    f("depth.t_end", c.depth.t_end);
    f("depth.epsilon", c.depth.epsilon);
    f("depth.mask_gate", c.depth.mask_gate);

    f("fuse.voxel", c.fuse.voxel);
    f("fuse.truncation_factor", c.fuse.truncation_factor);

    f("eval.tau", c.eval.tau);
    f("eval.samples", c.eval.samples);
    f("eval.sample_seed", c.eval.sample_seed);
    f("eval.crop_margin", c.eval.crop_margin);

    f("check.max_chamfer", c.check.max_chamfer);
    f("check.min_f1", c.check.min_f1);
}

json::json_pointer pointer(const std::string& dotted) {
    std::string p = "/" + dotted;
    for (char& ch : p)
        if (ch == '.') ch = '/';
    return json::json_pointer(p);
}

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + what);
}

json encode(double v) { return v; }
json encode(int v) { return v; }
json encode(std::uint64_t v) { return v; }
json encode(Scenario v) { return to_string(v); }
json encode(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

void decode(const json& j, const std::string& path, double& out) {
    if (!j.is_number()) bad(path, "expected a number");
    out = j.get<double>();
}
void decode(const json& j, const std::string& path, int& out) {
    if (!j.is_number_integer()) bad(path, "expected an integer");
    out = j.get<int>();
}
void decode(const json& j, const std::string& path, std::uint64_t& out) {
    if (!j.is_number_unsigned()) bad(path, "expected a non-negative integer");
    out = j.get<std::uint64_t>();
}
void decode(const json& j, const std::string& path, Scenario& out) {
    if (!j.is_string()) bad(path, "expected a scenario name");
    try {
        out = parse_scenario(j.get<std::string>());
    } catch (const Error& e) {
        bad(path, e.what());
    }
}
void decode(const json& j, const std::string& path, Vec3& out) {
    if (!j.is_array() || j.size() != 3) bad(path, "expected a 3-element array");
    for (int k = 0; k < 3; ++k) {
        if (!j[k].is_number()) bad(path, "expected numbers");
        out[k] = j[k].get<double>();
    }
}

void check_known(const json& patch, const json& known, const std::string& prefix) {
    if (!patch.is_object()) bad(prefix.empty() ? "<root>" : prefix, "expected an object");
    for (const auto& [key, value] : patch.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        const auto it = known.find(key);
        if (it == known.end()) bad(path, "unknown key");
        if (it->is_object()) check_known(value, *it, path);
    }
}

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::InvalidConfig, what);
}

} // namespace

void ToolkitConfig::finalize() {
    require(threads >= 0, "threads must be >= 0");
    synth.seed = seed;
    train.seed = seed;
    train.render.threads = threads;
    train.render.plane_epsilon = depth.epsilon;
    synth.validate();
    train.validate();
    depth.validate();
    require(train.render.tile_size > 0, "render.tile_size must be positive");
    require(train.render.alpha_min >= 0.0 && train.render.alpha_min < train.render.alpha_max &&
                train.render.alpha_max < 1.0,
            "need 0 <= render.alpha_min < render.alpha_max < 1");
    require(fuse.voxel > 0.0 && fuse.truncation_factor > 0.0, "fuse.voxel and fuse.truncation_factor must be positive");
    require(eval.tau > 0.0 && eval.samples > 0 && eval.crop_margin >= 0.0, "invalid eval settings");
    require(check.max_chamfer > 0.0 && check.min_f1 >= 0.0 && check.min_f1 <= 1.0, "invalid check thresholds");
}

json config_to_json(const ToolkitConfig& cfg) {
    ToolkitConfig copy = cfg;
    json j = json::object();
    visit_fields(copy, [&](const char* path, auto& field) { j[pointer(path)] = encode(field); });
    return j;
}

ToolkitConfig config_from_json(const json& patch, const ToolkitConfig& base) {
    check_known(patch, config_to_json(base), "");
    ToolkitConfig out = base;
    visit_fields(out, [&](const char* path, auto& field) {
        const auto ptr = pointer(path);
        if (patch.contains(ptr)) decode(patch.at(ptr), path, field);
    });
    return out;
}

ToolkitConfig load_config(const std::filesystem::path& path, const ToolkitConfig& base) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
    }
    return config_from_json(j, base);
}

void apply_override(ToolkitConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) bad(assignment, "expected key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    json patch = json::object();
    patch[pointer(key)] = value;
    cfg = config_from_json(patch, cfg);
}

json spec_to_json(const SynthSpec& spec) {
    ToolkitConfig c;
    c.synth = spec;
    json j = config_to_json(c).at("synth");
    j["seed"] = spec.seed;
    return j;
}

} // namespace splatgeo
