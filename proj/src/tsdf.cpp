#include "splatgeo/tsdf.hpp"

#include "splatgeo/detail/mc_tables.hpp"
#include "splatgeo/error.hpp"
#include "splatgeo/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace splatgeo {

TsdfVolume make_tsdf_volume(const Vec3& lo, const Vec3& hi, double voxel, double truncation_factor) {
    if (!(voxel > 0.0)) throw Error(ErrorCode::InvalidArgument, "voxel size must be positive");
    if (!((hi.array() > lo.array()).all())) throw Error(ErrorCode::InvalidArgument, "empty TSDF bounds");
    TsdfVolume v;
    v.origin = lo;
    v.voxel = voxel;
    v.truncation = truncation_factor * voxel;
    for (int a = 0; a < 3; ++a) v.dims[a] = static_cast<int>(std::ceil((hi[a] - lo[a]) / voxel)) + 1;
    const std::size_t n = static_cast<std::size_t>(v.dims[0]) * v.dims[1] * v.dims[2];
    v.tsdf.assign(n, 1.0);
    v.weight.assign(n, 0.0);
    return v;
}

void tsdf_integrate(TsdfVolume& volume, const Image& depth, const CameraView& cam, int threads) {
    if (depth.width() != cam.width || depth.height() != cam.height || depth.channels() != 1)
        throw Error(ErrorCode::ShapeMismatch, "depth map does not match the camera");
    const Mat3 r = cam.rotation();
    const Vec3 t = cam.translation();
    parallel_for(static_cast<std::size_t>(volume.dims[2]), threads, [&](std::size_t kk) {
        const int k = static_cast<int>(kk);
        for (int j = 0; j < volume.dims[1]; ++j)
            for (int i = 0; i < volume.dims[0]; ++i) {
                const Vec3 c = r * volume.point(i, j, k) + t;
                if (!(c.z() > 0.0)) continue;
                const double u = cam.fx() * c.x() / c.z() + cam.intrinsics(0, 1) * c.y() / c.z() + cam.cx();
                const double v = cam.fy() * c.y() / c.z() + cam.cy();
                const int px = static_cast<int>(std::floor(u));
                const int py = static_cast<int>(std::floor(v));
                if (px < 0 || py < 0 || px >= cam.width || py >= cam.height) continue;
                const double d = depth.at(px, py);
                if (!(d > 0.0) || !std::isfinite(d)) continue;
                const double sdf = d - c.z();
                if (sdf < -volume.truncation) continue;
                const double value = std::min(1.0, sdf / volume.truncation);
                const std::size_t idx = volume.index(i, j, k);
                const double w = volume.weight[idx];
                volume.tsdf[idx] = (w * volume.tsdf[idx] + value) / (w + 1.0);
                volume.weight[idx] = w + 1.0;
            }
    });
}

namespace {

constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

} // namespace

TriMesh marching_cubes(const TsdfVolume& vol, double iso) {
    TriMesh mesh;
    std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;
    const auto [nx, ny, nz] = vol.dims;

    // Vertex on the grid edge between two samples, keyed by its lower sample
    // and axis so neighbouring cubes share it.
    auto vertex_on = [&](const std::array<int, 3>& a, const std::array<int, 3>& b) {
        std::array<int, 3> lo = a, hi = b;
        if (std::tie(hi[2], hi[1], hi[0]) < std::tie(lo[2], lo[1], lo[0])) std::swap(lo, hi);
        int axis = 0;
        while (lo[axis] == hi[axis]) ++axis;
        const std::uint64_t key = static_cast<std::uint64_t>(vol.index(lo[0], lo[1], lo[2])) * 3 + axis;
        const auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        const double va = vol.tsdf[vol.index(lo[0], lo[1], lo[2])];
        const double vb = vol.tsdf[vol.index(hi[0], hi[1], hi[2])];
        const Vec3 pa = vol.point(lo[0], lo[1], lo[2]);
        const Vec3 pb = vol.point(hi[0], hi[1], hi[2]);
        const double denom = vb - va;
        const double s = std::abs(denom) < 1e-12 ? 0.5 : std::clamp((iso - va) / denom, 0.0, 1.0);
        const auto id = static_cast<std::uint32_t>(mesh.vertices.size());
        mesh.vertices.push_back(pa + s * (pb - pa));
        edge_vertex.emplace(key, id);
        return id;
    };

    for (int k = 0; k + 1 < nz; ++k)
        for (int j = 0; j + 1 < ny; ++j)
            for (int i = 0; i + 1 < nx; ++i) {
                int cube = 0;
                bool observed = true;
                std::array<std::array<int, 3>, 8> corner;
                for (int c = 0; c < 8; ++c) {
                    corner[c] = {i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]};
                    const std::size_t idx = vol.index(corner[c][0], corner[c][1], corner[c][2]);
                    if (!(vol.weight[idx] > 0.0)) {
                        observed = false;
                        break;
                    }
                    if (vol.tsdf[idx] < iso) cube |= 1 << c;
                }
                if (!observed || detail::kMcEdgeTable[cube] == 0) continue;
                std::uint32_t ids[12];
                for (int e = 0; e < 12; ++e)
                    if (detail::kMcEdgeTable[cube] & (1 << e)) ids[e] = vertex_on(corner[kEdge[e][0]], corner[kEdge[e][1]]);
                const auto& tri = detail::kMcTriTable[cube];
                for (int t = 0; t < 16 && tri[t] >= 0; t += 3)
                    mesh.triangles.push_back({ids[tri[t]], ids[tri[t + 1]], ids[tri[t + 2]]});
            }
    if (mesh.triangles.empty()) throw Error(ErrorCode::EmptyIsosurface, "volume has no zero crossing");
    return mesh;
}

} // namespace splatgeo
