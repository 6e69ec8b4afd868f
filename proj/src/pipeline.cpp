#include "splatgeo/pipeline.hpp"

#include "splatgeo/error.hpp"

#include <chrono>
#include <fstream>

namespace splatgeo {

namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.code(), std::string(name) + " stage: " + e.what());
    }
}

} // namespace

TrainOutputs run_training(const SceneFile& init, const std::vector<TrainView>& views, const TrainConfig& cfg,
                          const fs::path& out, int stages, const fs::path& resume) {
    cfg.validate();
    if (views.empty()) throw Error(ErrorCode::InvalidArgument, "training needs at least one view");
    std::error_code ec;
    fs::create_directories(out, ec);
    std::ofstream csv(out / "train_log.csv");
    if (!csv) throw Error(ErrorCode::IoFailure, "cannot write " + (out / "train_log.csv").string());
    TrainLog log(&csv);
    TrainOutputs r;
    if (stages == 2) {
        if (resume.empty()) throw Error(ErrorCode::InvalidArgument, "stage 2 alone needs a stage-1 checkpoint");
        r.stage1 = load_checkpoint(resume);
    } else {
        r.stage1 = train_stage1(init, views, cfg, &log);
        save_checkpoint(r.stage1, out / "stage1");
        if (stages == 1) return r;
    }
    r.stage2 = train_stage2(r.stage1, views, cfg, &log);
    save_checkpoint(r.stage2, out / "stage2");
    return r;
}

std::vector<Image> extract_first_depths(const SceneFile& scene, const std::vector<CameraView>& cameras,
                                        const WindowSearchConfig& depth, const RenderSettings& render,
                                        const fs::path& dir) {
    depth.validate();
    if (!dir.empty()) {
        std::error_code ec;
        fs::create_directories(dir, ec);
    }
    std::vector<Image> out;
    for (std::size_t i = 0; i < cameras.size(); ++i) {
        out.push_back(extract_all(scene, cameras[i], depth, render).first);
        if (!dir.empty()) write_pfm(out.back(), dir / (view_stem(i) + ".pfm"));
    }
    return out;
}

PipelineResult run_pipeline(const ToolkitConfig& cfg_in, const fs::path& out) {
    ToolkitConfig cfg = cfg_in;
    cfg.finalize();
    PipelineResult r;
    const fs::path data = out / "data";

    auto t0 = std::chrono::steady_clock::now();
    stage("synth", [&] {
        write_dataset(generate(cfg.synth, cfg.threads), data);
        return 0;
    });
    r.seconds_synth = seconds_since(t0);

    // Everything downstream reads the files back, exactly as the separate
    // commands would.
    t0 = std::chrono::steady_clock::now();
    stage("train", [&] {
        const auto views = load_train_views(data, data);
        run_training(load_scene(data / "scene_init.sgs"), views, cfg.train, out / "train");
        return 0;
    });
    r.seconds_train = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    const SceneFile scene = load_scene(out / "train" / "stage2" / "scene.sgs");
    r.gaussians = scene.size();
    const auto cameras = read_camera_dir(data / "cameras");
    stage("extract", [&] { return extract_first_depths(scene, cameras, cfg.depth, cfg.train.render, out / "depths"); });
    r.seconds_extract = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    const TriMesh mesh = stage("fuse", [&] {
        TriMesh m = fuse_depths(read_depth_dir(out / "depths"), cameras, read_roi(data / "synth.json"), cfg.fuse,
                                cfg.threads);
        write_ply(m, out / "mesh.ply");
        return m;
    });
    r.mesh_vertices = mesh.vertices.size();
    r.mesh_triangles = mesh.triangles.size();
    r.seconds_fuse = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    r.metrics = stage("eval", [&] {
        return evaluate_prediction(read_ply(out / "mesh.ply"), read_ply(data / "gt_mesh.ply"), cfg.eval, cfg.threads);
    });
    r.seconds_eval = seconds_since(t0);
    return r;
}

} // namespace splatgeo
