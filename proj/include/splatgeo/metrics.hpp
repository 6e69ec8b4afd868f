#pragma once

#include "splatgeo/mesh.hpp"

#include <cstdint>

namespace splatgeo {

struct GeoMetrics {
    double chamfer = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Symmetric mean of nearest-sample distances between area-weighted samples of
// the two surfaces. Both meshes are sampled with the same seed.
double chamfer_distance(const TriMesh& pred, const TriMesh& gt, std::size_t samples = 100000, std::uint64_t seed = 0,
                        int threads = 0);

// Vertex-based precision (pred vertices within tau of a gt vertex), recall
// (gt vertices within tau of a pred vertex) and their harmonic mean.
GeoMetrics f1_score(const TriMesh& pred, const TriMesh& gt, double tau = 0.005, int threads = 0);

GeoMetrics evaluate_meshes(const TriMesh& pred, const TriMesh& gt, double tau = 0.005, std::size_t samples = 100000,
                           std::uint64_t seed = 0, int threads = 0);

} // namespace splatgeo
