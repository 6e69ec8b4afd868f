#include "splatgeo/metrics.hpp"

#include "splatgeo/error.hpp"
#include "splatgeo/parallel.hpp"

#include <numeric>

namespace splatgeo {

namespace {

double mean_nearest(const std::vector<Vec3>& from, const KdTree& to, int threads) {
    std::vector<double> d(from.size());
    parallel_for(from.size(), threads, [&](std::size_t i) { d[i] = to.nearest_distance(from[i]); });
    return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

std::size_t count_within(const std::vector<Vec3>& from, const KdTree& to, double tau, int threads) {
    std::vector<unsigned char> hit(from.size());
    parallel_for(from.size(), threads, [&](std::size_t i) { hit[i] = to.nearest_distance(from[i]) < tau; });
    return std::accumulate(hit.begin(), hit.end(), std::size_t{0});
}

} // namespace

double chamfer_distance(const TriMesh& pred, const TriMesh& gt, std::size_t samples, std::uint64_t seed, int threads) {
    if (pred.triangles.empty() || gt.triangles.empty()) throw Error(ErrorCode::EmptyMesh, "chamfer needs two non-empty meshes");
    const auto sp = sample_surface(pred, samples, seed);
    const auto sg = sample_surface(gt, samples, seed);
    const KdTree tp(sp), tg(sg);
    return 0.5 * (mean_nearest(sp, tg, threads) + mean_nearest(sg, tp, threads));
}

GeoMetrics f1_score(const TriMesh& pred, const TriMesh& gt, double tau, int threads) {
    if (pred.vertices.empty() || gt.vertices.empty()) throw Error(ErrorCode::EmptyMesh, "F1 needs two non-empty vertex sets");
    const KdTree tp(pred.vertices), tg(gt.vertices);
    GeoMetrics m;
    m.precision = static_cast<double>(count_within(pred.vertices, tg, tau, threads)) / pred.vertices.size();
    m.recall = static_cast<double>(count_within(gt.vertices, tp, tau, threads)) / gt.vertices.size();
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

GeoMetrics evaluate_meshes(const TriMesh& pred, const TriMesh& gt, double tau, std::size_t samples, std::uint64_t seed,
                           int threads) {
    GeoMetrics m = f1_score(pred, gt, tau, threads);
    m.chamfer = chamfer_distance(pred, gt, samples, seed, threads);
    return m;
}

} // namespace splatgeo
