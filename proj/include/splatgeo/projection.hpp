#pragma once

#include "splatgeo/camera.hpp"
#include "splatgeo/scene.hpp"
#include "splatgeo/types.hpp"

#include <cmath>
#include <cstdint>
#include <optional>

namespace splatgeo {

struct ProjectionSettings {
    double near_plane = 0.01;    // metres
    double dilation = 0.3;       // px^2 added to the screen covariance diagonal
    double footprint_sigma = 3.0;
};

struct ProjectedGaussian {
    Vec2 mean;            // pixels
    Mat2 cov;             // J W Sigma W^T J^T, before dilation
    Vec3 conic;           // (a, b, c) of the inverse of the dilated covariance
    double depth = 0.0;   // camera-space z of the centre
    Vec3 normal;          // world, unit, camera-facing
    double distance = 0.0; // camera centre to the Gaussian plane
    double radius = 0.0;  // footprint radius in pixels
    std::uint32_t index = 0;
};

Mat3 build_covariance(const Eigen::Quaterniond& rotation, const Vec3& scale);

// Rotated axis of the smallest scale (ties -> lowest axis), flipped so that
// n.(p - camera centre) <= 0, and d = |n.(p - camera centre)|.
struct GaussianNormal {
    Vec3 normal;
    double distance;
};
GaussianNormal gaussian_normal(const ActivatedGaussian& g, const CameraView& cam);

// Returns nullopt when the Gaussian is behind the near plane or its footprint
// misses the image.
std::optional<ProjectedGaussian> project(const ActivatedGaussian& g, const CameraView& cam,
                                         const ProjectionSettings& settings = {});

namespace detail {

template <typename T>
using V3 = Eigen::Matrix<T, 3, 1>;

template <typename T>
Eigen::Matrix<T, 3, 3> rotation_from_quaternion(const Eigen::Matrix<T, 4, 1>& q_raw) {
    const T n = sqrt(q_raw.squaredNorm());
    const T w = q_raw[0] / n, x = q_raw[1] / n, y = q_raw[2] / n, z = q_raw[3] / n;
    Eigen::Matrix<T, 3, 3> r;
    r(0, 0) = 1.0 - 2.0 * (y * y + z * z);
    r(0, 1) = 2.0 * (x * y - w * z);
    r(0, 2) = 2.0 * (x * z + w * y);
    r(1, 0) = 2.0 * (x * y + w * z);
    r(1, 1) = 1.0 - 2.0 * (x * x + z * z);
    r(1, 2) = 2.0 * (y * z - w * x);
    r(2, 0) = 2.0 * (x * z - w * y);
    r(2, 1) = 2.0 * (y * z + w * x);
    r(2, 2) = 1.0 - 2.0 * (x * x + y * y);
    return r;
}

inline int min_scale_axis(const Vec3& log_scale) {
    int axis = 0;
    for (int k = 1; k < 3; ++k)
        if (log_scale[k] < log_scale[axis]) axis = k;
    return axis;
}

// Everything the rasteriser needs from a Gaussian's geometric parameters.
// Written once for double and for autodiff scalars so the backward pass uses
// exactly the forward arithmetic.
template <typename T>
struct Geometry {
    Eigen::Matrix<T, 2, 1> mean;
    Eigen::Matrix<T, 2, 2> cov;
    T conic_a, conic_b, conic_c;
    T depth;
    V3<T> normal;
    T distance;
    V3<T> view_dir;
};

template <typename T>
Geometry<T> project_geometry(const V3<T>& center, const Eigen::Matrix<T, 4, 1>& q_raw, const V3<T>& log_scale,
                             int min_axis, const CameraView& cam, double dilation) {
    using std::exp;
    using std::sqrt;
    Geometry<T> out;
    const Eigen::Matrix<T, 3, 3> rot = rotation_from_quaternion<T>(q_raw);
    V3<T> s2;
    for (int k = 0; k < 3; ++k) s2[k] = exp(2.0 * log_scale[k]);
    const Eigen::Matrix<T, 3, 3> sigma = rot * s2.asDiagonal() * rot.transpose();

    const Eigen::Matrix<T, 3, 3> rw = cam.rotation().template cast<T>();
    const V3<T> t = rw * center + cam.translation().template cast<T>();
    const T tz = t.z();
    const T inv_z = 1.0 / tz;
    out.depth = tz;
    out.mean << cam.fx() * t.x() * inv_z + cam.cx(), cam.fy() * t.y() * inv_z + cam.cy();

    Eigen::Matrix<T, 2, 3> jac;
    jac << T(cam.fx()) * inv_z, T(0.0), -cam.fx() * t.x() * inv_z * inv_z, T(0.0), T(cam.fy()) * inv_z,
        -cam.fy() * t.y() * inv_z * inv_z;
    const Eigen::Matrix<T, 2, 3> m = jac * rw;
    out.cov = m * sigma * m.transpose();
    const T a = out.cov(0, 0) + dilation;
    const T b = out.cov(0, 1);
    const T c = out.cov(1, 1) + dilation;
    const T det = a * c - b * b;
    out.conic_a = c / det;
    out.conic_b = -b / det;
    out.conic_c = a / det;

    const V3<T> to_center = center - cam.center().template cast<T>();
    V3<T> n = rot.col(min_axis);
    if (n.dot(to_center) > 0.0) n = -n;
    out.normal = n;
    out.distance = -n.dot(to_center);
    out.view_dir = to_center / sqrt(to_center.squaredNorm());
    return out;
}

} // namespace detail

} // namespace splatgeo
