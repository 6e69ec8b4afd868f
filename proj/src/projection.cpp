#include "splatgeo/projection.hpp"

#include <algorithm>

namespace splatgeo {

Mat3 build_covariance(const Eigen::Quaterniond& rotation, const Vec3& scale) {
    const Mat3 r = rotation.toRotationMatrix();
    return r * scale.array().square().matrix().asDiagonal() * r.transpose();
}

GaussianNormal gaussian_normal(const ActivatedGaussian& g, const CameraView& cam) {
    const Mat3 r = g.rotation.toRotationMatrix();
    int axis = 0;
    for (int k = 1; k < 3; ++k)
        if (g.scale[k] < g.scale[axis]) axis = k;
    Vec3 n = r.col(axis);
    const Vec3 to_center = g.center - cam.center();
    if (n.dot(to_center) > 0.0) n = -n;
    return {n, std::abs(n.dot(to_center))};
}

std::optional<ProjectedGaussian> project(const ActivatedGaussian& g, const CameraView& cam,
                                         const ProjectionSettings& settings) {
    const Vec3 t = cam.to_camera(g.center);
    if (!(t.z() > settings.near_plane)) return std::nullopt;

    const Vec4 q(g.rotation.w(), g.rotation.x(), g.rotation.y(), g.rotation.z());
    const Vec3 log_scale = g.scale.array().log();
    const auto geo = detail::project_geometry<double>(g.center, q, log_scale, detail::min_scale_axis(log_scale), cam,
                                                      settings.dilation);

    const double a = geo.cov(0, 0) + settings.dilation;
    const double b = geo.cov(0, 1);
    const double c = geo.cov(1, 1) + settings.dilation;
    const double det = a * c - b * b;
    if (!(det > 0.0)) return std::nullopt;
    const double mid = 0.5 * (a + c);
    const double lambda_max = mid + std::sqrt(std::max(0.1, mid * mid - det));
    const double radius = std::ceil(settings.footprint_sigma * std::sqrt(lambda_max));
    if (geo.mean.x() + radius < 0.0 || geo.mean.x() - radius > cam.width || geo.mean.y() + radius < 0.0 ||
        geo.mean.y() - radius > cam.height)
        return std::nullopt;

    ProjectedGaussian p;
    p.mean = geo.mean;
    p.cov = geo.cov;
    p.conic = Vec3(geo.conic_a, geo.conic_b, geo.conic_c);
    p.depth = geo.depth;
    p.normal = geo.normal;
    p.distance = geo.distance;
    p.radius = radius;
    return p;
}

} // namespace splatgeo
