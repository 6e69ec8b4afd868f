#pragma once

#include "splatgeo/types.hpp"

#include <filesystem>
#include <vector>

namespace splatgeo {

// Pinhole camera: intrinsics in pixels and a world-to-camera transform.
// Camera space looks down +z with x right and y down. Pixel (x, y) covers
// [x, x+1) x [y, y+1); its centre sits at (x + 0.5, y + 0.5).
struct CameraView {
    Mat3 intrinsics = Mat3::Identity();
    Mat4 world_to_camera = Mat4::Identity();
    int width = 0;
    int height = 0;

    Mat3 rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
    Vec3 translation() const { return world_to_camera.topRightCorner<3, 1>(); }
    Vec3 center() const { return -rotation().transpose() * translation(); }
    double fx() const { return intrinsics(0, 0); }
    double fy() const { return intrinsics(1, 1); }
    double cx() const { return intrinsics(0, 2); }
    double cy() const { return intrinsics(1, 2); }

    Vec3 to_camera(const Vec3& world) const { return rotation() * world + translation(); }

    // World-space ray through the pixel centre, scaled so that its camera-space
    // z component is 1. Points along the ray are center() + z * ray.
    Vec3 pixel_ray(int x, int y) const;

    // Pixel-ray reversed: points from the scene toward the camera, still with
    // unit camera-z length. Dividing a camera-to-plane distance by n.view
    // (n camera-facing) yields camera-space depth.
    Vec3 view_vector(int x, int y) const { return -pixel_ray(x, y); }

    // Throws InvalidArgument when the camera invariants do not hold.
    void validate() const;
};

CameraView make_look_at_camera(const Vec3& eye, const Vec3& target, const Vec3& up, double focal, int width,
                               int height);

CameraView read_camera_json(const std::filesystem::path& path);
void write_camera_json(const CameraView& camera, const std::filesystem::path& path);

// Reads every *.json in a directory, sorted by file name.
std::vector<CameraView> read_camera_dir(const std::filesystem::path& dir);

} // namespace splatgeo
