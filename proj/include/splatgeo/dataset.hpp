#pragma once

#include "splatgeo/config.hpp"
#include "splatgeo/gradients.hpp"
#include "splatgeo/metrics.hpp"
#include "splatgeo/synth.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace splatgeo {

// On-disk layout of a synthetic dataset:
//   scene_gt.sgs  scene_init.sgs  gt_mesh.ply  synth.json
//   cameras/view_NNN.json
//   images/view_NNN.png     (16-bit, captured I_GT)
//   delighted/view_NNN.png  (16-bit, I_D)
//   masks/view_NNN.png      (8-bit transparency mask)
//   normals/view_NNN.pfm    (world normals)
//   depth/view_NNN.pfm      (analytic depth, 0 = no surface)
std::string view_stem(std::size_t index);

void write_dataset(const SynthResult& result, const std::filesystem::path& dir);

// Views from `views_dir` (cameras/, images/) with priors from `priors_dir`
// (delighted/, masks/, normals/). Missing prior folders mean: de-lit image =
// captured image, mask = 0, no normal prior.
std::vector<TrainView> load_train_views(const std::filesystem::path& views_dir,
                                        const std::filesystem::path& priors_dir);

// Every *.pfm in a directory, sorted by name.
std::vector<Image> read_depth_dir(const std::filesystem::path& dir);

// Region of interest stored in synth.json.
struct Roi {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
};
Roi read_roi(const std::filesystem::path& synth_json);

// Integrates every depth map into a fresh volume over [lo, hi] and meshes it.
TriMesh fuse_depths(const std::vector<Image>& depths, const std::vector<CameraView>& cameras, const Roi& roi,
                    const FuseConfig& cfg, int threads = 0);

// Bounds of the valid back-projected depth samples, grown by one truncation.
Roi roi_from_depths(const std::vector<Image>& depths, const std::vector<CameraView>& cameras, double margin);

// Crops the prediction to the ground-truth box grown by crop_margin, then
// scores it. Throws EmptyMesh when nothing is left.
GeoMetrics evaluate_prediction(const TriMesh& pred, const TriMesh& gt, const EvalConfig& cfg, int threads = 0);

} // namespace splatgeo
