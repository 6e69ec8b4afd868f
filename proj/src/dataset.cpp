#include "splatgeo/dataset.hpp"

#include "splatgeo/error.hpp"
#include "splatgeo/tsdf.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>

namespace splatgeo {

namespace fs = std::filesystem;
using nlohmann::json;

std::string view_stem(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "view_%03zu", index);
    return buf;
}

namespace {

void make_dirs(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& ext) {
    std::vector<fs::path> files;
    if (!fs::is_directory(dir)) throw Error(ErrorCode::IoFailure, "not a directory: " + dir.string());
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ext) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
}

} // namespace

void write_dataset(const SynthResult& result, const fs::path& dir) {
    for (const char* sub : {"cameras", "images", "delighted", "masks", "normals", "depth"}) make_dirs(dir / sub);
    save_scene(result.scene, dir / "scene_gt.sgs");
    save_scene(result.init, dir / "scene_init.sgs");
    write_ply(result.truth.mesh, dir / "gt_mesh.ply");
    for (std::size_t i = 0; i < result.truth.views.size(); ++i) {
        const ViewTruth& v = result.truth.views[i];
        const std::string stem = view_stem(i);
        write_camera_json(v.camera, dir / "cameras" / (stem + ".json"));
        write_png(v.image, dir / "images" / (stem + ".png"), 16);
        write_png(v.delit, dir / "delighted" / (stem + ".png"), 16);
        write_png(v.mask, dir / "masks" / (stem + ".png"), 8);
        write_pfm(v.normal, dir / "normals" / (stem + ".pfm"));
        write_pfm(v.depth, dir / "depth" / (stem + ".pfm"));
    }
    json j;
    j["spec"] = spec_to_json(result.spec);
    j["plate_splat_opacity"] = result.truth.plate_splat_opacity;
    j["plate_offset"] = json::array({result.truth.plate_offset.x(), result.truth.plate_offset.y()});
    j["roi_min"] = vec_json(result.truth.roi_min);
    j["roi_max"] = vec_json(result.truth.roi_max);
    j["gaussians"] = result.scene.size();
    j["views"] = result.truth.views.size();
    std::ofstream out(dir / "synth.json");
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + (dir / "synth.json").string());
    out << j.dump(2) << '\n';
}

std::vector<TrainView> load_train_views(const fs::path& views_dir, const fs::path& priors_dir) {
    const auto cameras = read_camera_dir(views_dir / "cameras");
    if (cameras.empty()) throw Error(ErrorCode::IoFailure, "no cameras in " + (views_dir / "cameras").string());
    std::vector<TrainView> views;
    for (std::size_t i = 0; i < cameras.size(); ++i) {
        const CameraView& cam = cameras[i];
        const std::string stem = view_stem(i);
        Image gt = read_png(views_dir / "images" / (stem + ".png"));
        if (gt.width() != cam.width || gt.height() != cam.height || gt.channels() != 3)
            throw Error(ErrorCode::ShapeMismatch, "image " + stem + " does not match its camera");
        const fs::path delit_path = priors_dir / "delighted" / (stem + ".png");
        Image delit = fs::exists(delit_path) ? read_png(delit_path) : gt;
        const fs::path mask_path = priors_dir / "masks" / (stem + ".png");
        Image mask = fs::exists(mask_path) ? read_mask_png(mask_path) : Image(cam.width, cam.height, 1);
        const fs::path normal_path = priors_dir / "normals" / (stem + ".pfm");
        Image normal = fs::exists(normal_path) ? read_pfm(normal_path) : Image(cam.width, cam.height, 3);
        views.push_back(make_train_view(cam, std::move(gt), std::move(delit), std::move(mask), std::move(normal)));
    }
    return views;
}

std::vector<Image> read_depth_dir(const fs::path& dir) {
    std::vector<Image> out;
    for (const auto& f : sorted_files(dir, ".pfm")) out.push_back(read_pfm(f));
    return out;
}

Roi read_roi(const fs::path& synth_json) {
    std::ifstream in(synth_json);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + synth_json.string());
    try {
        json j;
        in >> j;
        Roi r;
        for (int k = 0; k < 3; ++k) {
            r.lo[k] = j.at("roi_min").at(k).get<double>();
            r.hi[k] = j.at("roi_max").at(k).get<double>();
        }
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedHeader, synth_json.string() + ": " + e.what());
    }
}

TriMesh fuse_depths(const std::vector<Image>& depths, const std::vector<CameraView>& cameras, const Roi& roi,
                    const FuseConfig& cfg, int threads) {
    if (depths.size() != cameras.size())
        throw Error(ErrorCode::ShapeMismatch, "need one depth map per camera");
    TsdfVolume vol = make_tsdf_volume(roi.lo, roi.hi, cfg.voxel, cfg.truncation_factor);
    for (std::size_t i = 0; i < depths.size(); ++i) tsdf_integrate(vol, depths[i], cameras[i], threads);
    return marching_cubes(vol);
}

Roi roi_from_depths(const std::vector<Image>& depths, const std::vector<CameraView>& cameras, double margin) {
    Roi r;
    r.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    r.hi = -r.lo;
    for (std::size_t i = 0; i < depths.size() && i < cameras.size(); ++i) {
        const CameraView& cam = cameras[i];
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                const double d = depths[i].at(x, y);
                if (!(d > 0.0) || !std::isfinite(d)) continue;
                const Vec3 p = cam.center() + d * cam.pixel_ray(x, y);
                r.lo = r.lo.cwiseMin(p);
                r.hi = r.hi.cwiseMax(p);
            }
    }
    if (!(r.lo.array() <= r.hi.array()).all()) throw Error(ErrorCode::EmptyMesh, "no valid depth samples to bound");
    r.lo -= Vec3::Constant(margin);
    r.hi += Vec3::Constant(margin);
    return r;
}

GeoMetrics evaluate_prediction(const TriMesh& pred, const TriMesh& gt, const EvalConfig& cfg, int threads) {
    const Vec3 m = Vec3::Constant(cfg.crop_margin);
    const TriMesh cropped = crop_mesh(pred, gt.bbox_min() - m, gt.bbox_max() + m);
    if (cropped.triangles.empty())
        throw Error(ErrorCode::EmptyMesh, "prediction has no triangles near the ground truth");
    return evaluate_meshes(cropped, gt, cfg.tau, cfg.samples, cfg.sample_seed, threads);
}

} // namespace splatgeo
