// splatgeo command-line front end. Every command resolves a full config,
// validates it, runs, and writes a manifest (also on failure).

#include "splatgeo/config.hpp"
#include "splatgeo/dataset.hpp"
#include "splatgeo/error.hpp"
#include "splatgeo/image_quality.hpp"
#include "splatgeo/losses.hpp"
#include "splatgeo/manifest.hpp"
#include "splatgeo/parallel.hpp"
#include "splatgeo/pipeline.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace splatgeo;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kValidation = 2, kRuntime = 3, kCheckFailed = 4 };

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidSpec:
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidScale:
    case ErrorCode::NonfiniteField:
    case ErrorCode::MalformedHeader:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::EmptyScene: return kValidation;
    default: return kRuntime;
    }
}

struct Options {
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
    std::string manifest_path;

    // Per-command inputs and flags.
    std::string out, scene, camera, views, priors, depths, cameras, pred, gt, data, resume, image;
    std::string mode = "first";
    std::string scenario;
    std::optional<int> n_views;
    int stage = 1;
    std::string stages = "both";
    std::optional<double> dt, tstart, tend, voxel, tau;
    std::vector<double> bounds;
    bool check = false;
};

// Outcome of a command body: output paths to hash, inputs, result fields.
struct Run {
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;
    json results = json::object();
    int exit_code = kOk;
};

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out << text;
}

std::string estimator_table(const DilemmaReport& r) { return r.to_csv(); }

ViewEvaluation loss_for(const SceneFile& scene, const TrainView& view, int stage, const ToolkitConfig& cfg) {
    return evaluate_view(scene, view, stage, cfg.train.weights, cfg.train.render);
}

// --- command bodies --------------------------------------------------------

Run cmd_synth(const ToolkitConfig& cfg, const Options& o) {
    Run r;
    write_dataset(generate(cfg.synth, cfg.threads), o.out);
    r.outputs.push_back(o.out);
    r.results["scenario"] = to_string(cfg.synth.scenario);
    return r;
}

Run cmd_render(const ToolkitConfig& cfg, const Options& o) {
    Run r;
    if (o.stage != 1 && o.stage != 2) throw Error(ErrorCode::InvalidArgument, "--stage must be 1 or 2");
    const SceneFile scene = load_scene(o.scene);
    const CameraView cam = read_camera_json(o.camera);
    const RenderBundle b = render_view(scene, cam, o.stage, cfg.train.render);
    const fs::path dir = o.out;
    fs::create_directories(dir);
    write_pfm(b.color, dir / "color.pfm");
    write_png(b.color, dir / "color.png", 16);
    write_pfm(b.depth_standard, dir / "depth_standard.pfm");
    write_pfm(b.normal, dir / "normal.pfm");
    write_pfm(b.distance, dir / "distance.pfm");
    write_pfm(b.alpha, dir / "alpha.pfm");
    write_pfm(b.mask, dir / "mask.pfm");
    r.inputs = {o.scene, o.camera};
    r.outputs.push_back(dir);
    return r;
}

Run cmd_extract(const ToolkitConfig& cfg, const Options& o) {
    Run r;
    const SceneFile scene = load_scene(o.scene);
    const CameraView cam = read_camera_json(o.camera);
    const DepthMaps maps = extract_all(scene, cam, cfg.depth, cfg.train.render);
    const Image* chosen = nullptr;
    if (o.mode == "standard") chosen = &maps.standard;
    else if (o.mode == "unbiased") chosen = &maps.unbiased;
    else if (o.mode == "nearest") chosen = &maps.nearest;
    else if (o.mode == "first") chosen = &maps.first;
    else throw Error(ErrorCode::InvalidArgument, "unknown depth mode " + o.mode);
    write_pfm(*chosen, o.out);
    std::size_t fallback = 0;
    for (double f : maps.fallback.data()) fallback += f > 0.0;
    r.inputs = {o.scene, o.camera};
    r.outputs.push_back(o.out);
    r.results["mode"] = o.mode;
    r.results["fallback_pixels"] = fallback;
    return r;
}

Run cmd_loss_report(const ToolkitConfig& cfg, const Options& o) {
    Run r;
    if (o.stage != 1 && o.stage != 2) throw Error(ErrorCode::InvalidArgument, "--stage must be 1 or 2");
    const SceneFile scene = load_scene(o.scene);
    const fs::path cam_path = o.camera;
    const CameraView cam = read_camera_json(cam_path);
    const std::string stem = cam_path.stem().string();
    const fs::path image_path = o.image.empty() ? cam_path.parent_path().parent_path() / "images" / (stem + ".png")
                                                : fs::path(o.image);
    Image gt = read_png(image_path);
    const fs::path pri = o.priors;
    const fs::path delit_path = pri / "delighted" / (stem + ".png");
    const fs::path mask_path = pri / "masks" / (stem + ".png");
    const fs::path normal_path = pri / "normals" / (stem + ".pfm");
    Image delit = fs::exists(delit_path) ? read_png(delit_path) : gt;
    Image mask = fs::exists(mask_path) ? read_mask_png(mask_path) : Image(cam.width, cam.height, 1);
    Image normal = fs::exists(normal_path) ? read_pfm(normal_path) : Image(cam.width, cam.height, 3);
    const TrainView view = make_train_view(cam, std::move(gt), std::move(delit), std::move(mask), std::move(normal));
    const ViewEvaluation ev = loss_for(scene, view, o.stage, cfg);

    std::ostringstream table;
    table.precision(12);
    table << "term,value\n"
          << "rgb," << ev.parts.rgb << "\ntransparency," << ev.parts.transparency << "\nnormal_prior,"
          << ev.parts.normal_prior << "\nconsistency," << ev.parts.consistency << "\nflatten," << ev.parts.flatten
          << "\ntotal," << ev.total << '\n';
    std::cout << table.str();
    if (!o.out.empty()) {
        write_text(o.out, table.str());
        r.outputs.push_back(o.out);
    }
    r.inputs = {o.scene, cam_path, image_path};
    r.results = {{"rgb", ev.parts.rgb},
                 {"transparency", ev.parts.transparency},
                 {"normal_prior", ev.parts.normal_prior},
                 {"consistency", ev.parts.consistency},
                 {"flatten", ev.parts.flatten},
                 {"total", ev.total}};
    return r;
}

Run cmd_train(const ToolkitConfig& cfg, const Options& o) {
    Run r;
    int stages = 0;
    if (o.stages == "1") stages = 1;
    else if (o.stages == "2") stages = 2;
    else if (o.stages != "both") throw Error(ErrorCode::InvalidArgument, "--stages must be 1, 2 or both");
    const auto views = load_train_views(o.views, o.priors.empty() ? o.views : o.priors);
    const SceneFile init = stages == 2 ? SceneFile{} : load_scene(o.scene);
    const TrainOutputs t = run_training(init, views, cfg.train, o.out, stages, o.resume);
    if (!o.scene.empty()) r.inputs.push_back(o.scene);
    r.inputs.push_back(o.views);
    r.outputs.push_back(o.out);
    r.results["gaussians"] = (stages == 1 ? t.stage1 : t.stage2).scene.size();
    return r;
}

Run cmd_fuse(const ToolkitConfig& cfg, const Options& o) {
    Run r;
    const auto depths = read_depth_dir(o.depths);
    const auto cams = read_camera_dir(o.cameras);
    Roi roi;
    if (o.bounds.size() == 6) {
        roi.lo = Vec3(o.bounds[0], o.bounds[1], o.bounds[2]);
        roi.hi = Vec3(o.bounds[3], o.bounds[4], o.bounds[5]);
    } else if (!o.data.empty()) {
        roi = read_roi(fs::path(o.data) / "synth.json");
    } else {
        roi = roi_from_depths(depths, cams, cfg.fuse.truncation_factor * cfg.fuse.voxel);
    }
    const TriMesh mesh = fuse_depths(depths, cams, roi, cfg.fuse, cfg.threads);
    write_ply(mesh, o.out);
    r.inputs = {o.depths, o.cameras};
    r.outputs.push_back(o.out);
    r.results["vertices"] = mesh.vertices.size();
    r.results["triangles"] = mesh.triangles.size();
    return r;
}

Run cmd_eval(const ToolkitConfig& cfg, const Options& o) {
    Run r;
    const GeoMetrics m = evaluate_prediction(read_ply(o.pred), read_ply(o.gt), cfg.eval, cfg.threads);
    std::ostringstream table;
    table.precision(12);
    table << "metric,value\nchamfer," << m.chamfer << "\nprecision," << m.precision << "\nrecall," << m.recall
          << "\nf1," << m.f1 << '\n';
    std::cout << table.str();
    if (!o.out.empty()) {
        write_text(o.out, table.str());
        r.outputs.push_back(o.out);
    }
    r.inputs = {o.pred, o.gt};
    r.results = {{"chamfer", m.chamfer}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
    return r;
}

Run cmd_eval_img(const ToolkitConfig&, const Options& o) {
    Run r;
    const Image a = read_image(o.pred), b = read_image(o.gt);
    const double p = psnr(a, b), s = ssim(a, b);
    std::ostringstream table;
    table.precision(12);
    table << "metric,value\npsnr," << p << "\nssim," << s << '\n';
    std::cout << table.str();
    if (!o.out.empty()) {
        write_text(o.out, table.str());
        r.outputs.push_back(o.out);
    }
    r.inputs = {o.pred, o.gt};
    r.results = {{"psnr", p}, {"ssim", s}};
    return r;
}

Run cmd_dilemma(const ToolkitConfig& cfg, const Options& o) {
    Run r;
    const fs::path data = o.data;
    const fs::path scene_path = o.scene.empty() ? data / "scene_gt.sgs" : fs::path(o.scene);
    const SceneFile scene = load_scene(scene_path);
    GroundTruth truth;
    const auto cams = read_camera_dir(data / "cameras");
    for (std::size_t i = 0; i < cams.size(); ++i) {
        ViewTruth v;
        v.camera = cams[i];
        v.depth = read_pfm(data / "depth" / (view_stem(i) + ".pfm"));
        v.mask = read_mask_png(data / "masks" / (view_stem(i) + ".png"));
        truth.views.push_back(std::move(v));
    }
    const DilemmaReport rep = dilemma_report(scene, truth, cfg.depth, cfg.train.render);
    const std::string table = estimator_table(rep);
    std::cout << table;
    if (!o.out.empty()) {
        write_text(o.out, table);
        r.outputs.push_back(o.out);
    }
    r.inputs = {scene_path, data / "cameras", data / "depth", data / "masks"};
    for (const auto& row : rep.rows)
        r.results[row.estimator] = {{"mean_signed", row.mean_signed},
                                    {"mean_abs", row.mean_abs},
                                    {"max_abs", row.max_abs},
                                    {"pixels", row.pixels}};
    return r;
}

Run cmd_pipeline(const ToolkitConfig& cfg, const Options& o) {
    Run r;
    const PipelineResult p = run_pipeline(cfg, o.out);
    for (const char* sub : {"data", "train", "depths", "mesh.ply"}) r.outputs.push_back(fs::path(o.out) / sub);
    const bool pass = p.passes(cfg.check);
    r.results = {{"chamfer", p.metrics.chamfer},
                 {"precision", p.metrics.precision},
                 {"recall", p.metrics.recall},
                 {"f1", p.metrics.f1},
                 {"gaussians", p.gaussians},
                 {"mesh_vertices", p.mesh_vertices},
                 {"mesh_triangles", p.mesh_triangles},
                 {"seconds", {{"synth", p.seconds_synth},
                              {"train", p.seconds_train},
                              {"extract", p.seconds_extract},
                              {"fuse", p.seconds_fuse},
                              {"eval", p.seconds_eval}}},
                 {"check", o.check ? json(pass ? "pass" : "fail") : json(nullptr)}};
    std::cout.precision(6);
    std::cout << "chamfer " << p.metrics.chamfer << " m, precision " << p.metrics.precision << ", recall "
              << p.metrics.recall << ", f1 " << p.metrics.f1 << '\n';
    if (o.check) {
        std::cout << (pass ? "check passed" : "check FAILED") << " (chamfer < " << cfg.check.max_chamfer
                  << ", f1 > " << cfg.check.min_f1 << ")\n";
        if (!pass) r.exit_code = kCheckFailed;
    }
    return r;
}

fs::path default_manifest(const std::string& command, const Options& o) {
    if (!o.manifest_path.empty()) return o.manifest_path;
    if (command == "synth" || command == "render" || command == "train" || command == "pipeline")
        return fs::path(o.out) / "manifest.json";
    if (!o.out.empty()) return fs::path(o.out + ".manifest.json");
    return fs::path(command + ".manifest.json");
}

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);

    // A manifest rerun replays the recorded arguments on top of the recorded
    // resolved config, then compares output hashes.
    std::optional<RunManifest> replay;
    for (std::size_t i = 0; i + 1 < args.size(); ++i)
        if (args[i] == "--from-manifest") {
            try {
                replay = RunManifest::read(args[i + 1]);
            } catch (const Error& e) {
                std::cerr << "error: " << e.what() << '\n';
                return exit_code_for(e.code());
            }
            args = replay->argv;
            break;
        }

    CLI::App app{"Gaussian-splatting geometry toolkit: first-surface depth, two-stage training, TSDF meshing", "splatgeo"};
    app.set_version_flag("--version", SPLATGEO_VERSION);
    app.require_subcommand(0, 1);
    app.fallthrough();
    Options o;
    bool print_defaults = false;
    std::string from_manifest_unused;
    app.add_option("--config", o.config_path, "JSON config file (unknown keys are rejected)");
    app.add_option("--set", o.sets, "Override one config value: dotted.key=value");
    app.add_option("--threads", o.threads, "Worker threads (default: SPLATGEO_THREADS or hardware)");
    app.add_option("--seed", o.seed, "Seed for every generator");
    app.add_option("--manifest", o.manifest_path, "Where to write the run manifest");
    app.add_option("--from-manifest", from_manifest_unused, "Rerun a recorded command and verify its outputs");
    app.add_flag("--print-defaults", print_defaults, "Print the config (defaults plus --config/--set) and exit");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic scene with analytic ground truth");
    synth->add_option("--scenario", o.scenario, "plate-over-wall | sphere | opaque-wall | floater-field");
    synth->add_option("--views", o.n_views, "Number of views");
    synth->add_option("--out", o.out, "Output directory")->required();

    auto* render = app.add_subcommand("render", "Render every map of one view");
    render->add_option("--scene", o.scene)->required();
    render->add_option("--camera", o.camera)->required();
    render->add_option("--stage", o.stage, "1 or 2");
    render->add_option("--out", o.out, "Output directory")->required();

    auto* extract = app.add_subcommand("extract-depth", "Extract one depth map");
    extract->add_option("--scene", o.scene)->required();
    extract->add_option("--camera", o.camera)->required();
    extract->add_option("--mode", o.mode, "standard | unbiased | nearest | first");
    extract->add_option("--dt", o.dt, "Window size (m)");
    extract->add_option("--tstart", o.tstart, "Upper transmittance bound of the search band");
    extract->add_option("--tend", o.tend, "Lower transmittance bound of the search band");
    extract->add_option("--out", o.out, "Output PFM")->required();

    auto* loss = app.add_subcommand("loss-report", "Print every loss term for one view");
    loss->add_option("--scene", o.scene)->required();
    loss->add_option("--view", o.camera, "Camera JSON inside a dataset's cameras/ folder")->required();
    loss->add_option("--image", o.image, "Captured image (default: ../images/<view>.png)");
    loss->add_option("--priors", o.priors, "Folder with delighted/, masks/, normals/")->required();
    loss->add_option("--stage", o.stage, "1 or 2");
    loss->add_option("--out", o.out, "Also write the table here");

    auto* train = app.add_subcommand("train", "Two-stage optimisation");
    train->add_option("--scene-init", o.scene, "Initial scene");
    train->add_option("--views", o.views, "Folder with cameras/ and images/")->required();
    train->add_option("--priors", o.priors, "Folder with delighted/, masks/, normals/ (default: --views)");
    train->add_option("--stages", o.stages, "1, 2 or both");
    train->add_option("--resume", o.resume, "Stage-1 checkpoint for --stages 2");
    train->add_option("--out", o.out, "Checkpoint directory")->required();

    auto* fuse = app.add_subcommand("fuse", "TSDF-fuse depth maps and extract a mesh");
    fuse->add_option("--depths", o.depths)->required();
    fuse->add_option("--cameras", o.cameras)->required();
    fuse->add_option("--voxel", o.voxel, "Voxel size (m)");
    fuse->add_option("--bounds", o.bounds, "x0 y0 z0 x1 y1 z1")->expected(6);
    fuse->add_option("--roi-from", o.data, "Dataset folder whose synth.json gives the bounds");
    fuse->add_option("--out", o.out, "Output PLY")->required();

    auto* eval = app.add_subcommand("eval", "Chamfer distance and F1 of a mesh against ground truth");
    eval->add_option("--pred", o.pred)->required();
    eval->add_option("--gt", o.gt)->required();
    eval->add_option("--tau", o.tau, "F1 threshold (m)");
    eval->add_option("--out", o.out, "Also write the table here");

    auto* eval_img = app.add_subcommand("eval-img", "PSNR and SSIM of two images");
    eval_img->add_option("--pred", o.pred)->required();
    eval_img->add_option("--gt", o.gt)->required();
    eval_img->add_option("--out", o.out, "Also write the table here");

    auto* dilemma = app.add_subcommand("dilemma-report", "Depth-estimator errors on a synthetic dataset");
    dilemma->add_option("--data", o.data, "Dataset folder written by synth")->required();
    dilemma->add_option("--scene", o.scene, "Scene to evaluate (default: the ground-truth splats)");
    dilemma->add_option("--out", o.out, "Also write the table here");

    auto* pipeline = app.add_subcommand("pipeline", "synth, train, extract, fuse and evaluate");
    pipeline->add_option("--out", o.out, "Output directory")->required();
    pipeline->add_flag("--check", o.check, "Exit 4 when the mesh misses the configured thresholds");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    if (print_defaults) {
        // Defaults with any --config / --set layered on top.
        try {
            ToolkitConfig cfg;
            if (!o.config_path.empty()) cfg = load_config(o.config_path, cfg);
            for (const auto& s : o.sets) apply_override(cfg, s);
            std::cout << config_to_json(cfg).dump(2) << '\n';
        } catch (const Error& e) {
            std::cerr << "error: " << e.what() << '\n';
            return exit_code_for(e.code());
        }
        return kOk;
    }
    if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return kUsage;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    const auto t0 = std::chrono::steady_clock::now();
    RunManifest m;
    m.command = command;
    m.argv = args;
    m.version = SPLATGEO_VERSION;
    ToolkitConfig cfg;
    Run run;
    try {
        if (replay) {
            cfg = config_from_json(replay->config);
        } else {
            if (!o.config_path.empty()) cfg = load_config(o.config_path, cfg);
            for (const auto& s : o.sets) apply_override(cfg, s);
        }
        if (o.threads) cfg.threads = *o.threads;
        if (o.seed) cfg.seed = *o.seed;
        if (!o.scenario.empty()) cfg.synth.scenario = parse_scenario(o.scenario);
        if (o.n_views) cfg.synth.views = *o.n_views;
        if (o.dt) cfg.depth.window = *o.dt;
        if (o.tstart) cfg.depth.t_start = *o.tstart;
        if (o.tend) cfg.depth.t_end = *o.tend;
        if (o.voxel) cfg.fuse.voxel = *o.voxel;
        if (o.tau) cfg.eval.tau = *o.tau;
        // Recorded and resolved before validation so a failing run still
        // documents what it was given.
        m.config = config_to_json(cfg);
        m.seed = cfg.seed;
        cfg.finalize();
        if (cfg.threads == 0) cfg.threads = default_thread_count();
        cfg.train.render.threads = cfg.threads;

        if (command == "synth") run = cmd_synth(cfg, o);
        else if (command == "render") run = cmd_render(cfg, o);
        else if (command == "extract-depth") run = cmd_extract(cfg, o);
        else if (command == "loss-report") run = cmd_loss_report(cfg, o);
        else if (command == "train") run = cmd_train(cfg, o);
        else if (command == "fuse") run = cmd_fuse(cfg, o);
        else if (command == "eval") run = cmd_eval(cfg, o);
        else if (command == "eval-img") run = cmd_eval_img(cfg, o);
        else if (command == "dilemma-report") run = cmd_dilemma(cfg, o);
        else run = cmd_pipeline(cfg, o);
        m.exit_code = run.exit_code;
    } catch (const Error& e) {
        m.exit_code = exit_code_for(e.code());
        m.error = e.what();
        std::cerr << "error: " << e.what() << '\n';
    } catch (const std::exception& e) {
        m.exit_code = kRuntime;
        m.error = e.what();
        std::cerr << "error: " << e.what() << '\n';
    }

    try {
        for (const auto& p : run.inputs) hash_path(p, m.inputs);
        for (const auto& p : run.outputs) hash_path(p, m.outputs);
    } catch (const Error& e) {
        if (m.exit_code == kOk) m.exit_code = kRuntime;
        if (m.error.empty()) m.error = e.what();
    }
    m.results = run.results;
    m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    try {
        m.write(default_manifest(command, o));
    } catch (const std::exception& e) {
        std::cerr << "warning: manifest not written: " << e.what() << '\n';
    }

    if (replay && m.exit_code == kOk) {
        if (m.outputs != replay->outputs) {
            for (const auto& [path, hash] : replay->outputs) {
                const auto it = m.outputs.find(path);
                if (it == m.outputs.end() || it->second != hash) std::cerr << "mismatch: " << path << '\n';
            }
            std::cerr << "rerun does not reproduce the recorded outputs\n";
            return kCheckFailed;
        }
        std::cout << "reproduced " << m.outputs.size() << " recorded outputs\n";
    }
    return m.exit_code;
}
