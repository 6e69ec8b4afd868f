#pragma once

#include "splatgeo/camera.hpp"
#include "splatgeo/image.hpp"
#include "splatgeo/mesh.hpp"

#include <array>
#include <vector>

namespace splatgeo {

// Regular grid of signed-distance samples. Sample (i, j, k) sits at
// origin + voxel * (i, j, k).
struct TsdfVolume {
    Vec3 origin = Vec3::Zero();
    double voxel = 0.004;
    std::array<int, 3> dims{0, 0, 0};
    double truncation = 0.02;
    std::vector<double> tsdf;   // in [-1, 1], 1 where unobserved
    std::vector<double> weight; // >= 0

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
    }
    Vec3 point(int i, int j, int k) const { return origin + voxel * Vec3(i, j, k); }
    std::size_t size() const { return tsdf.size(); }
};

// Covers [lo, hi] with the given voxel size; truncation = factor * voxel.
TsdfVolume make_tsdf_volume(const Vec3& lo, const Vec3& hi, double voxel, double truncation_factor = 5.0);

// Projective update: sdf = depth(pixel) - z along the camera axis, truncated
// and averaged with unit weight per observation. Sentinel (<= 0) pixels and
// samples more than one truncation behind the surface are skipped.
void tsdf_integrate(TsdfVolume& volume, const Image& depth, const CameraView& cam, int threads = 0);

// Zero-crossing surface. Only cubes whose eight samples all carry weight emit
// triangles; vertices on shared edges are shared. Throws EmptyIsosurface.
TriMesh marching_cubes(const TsdfVolume& volume, double iso = 0.0);

} // namespace splatgeo
