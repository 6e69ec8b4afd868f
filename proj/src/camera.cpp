#include "splatgeo/camera.hpp"

#include "splatgeo/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

namespace splatgeo {

Vec3 CameraView::pixel_ray(int x, int y) const {
    const Vec3 cam((x + 0.5 - cx()) / fx(), (y + 0.5 - cy()) / fy(), 1.0);
    return rotation().transpose() * cam;
}

void CameraView::validate() const {
    if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "camera image size must be positive");
    if (!(fx() > 0.0) || !(fy() > 0.0)) throw Error(ErrorCode::InvalidArgument, "camera focal lengths must be positive");
    if (intrinsics(1, 0) != 0.0 || intrinsics(2, 0) != 0.0 || intrinsics(2, 1) != 0.0 || intrinsics(2, 2) != 1.0)
        throw Error(ErrorCode::InvalidArgument, "camera intrinsics must be upper triangular with K(2,2)=1");
    const Mat3 r = rotation();
    if ((r * r.transpose() - Mat3::Identity()).norm() >= 1e-6)
        throw Error(ErrorCode::InvalidArgument, "camera rotation is not orthonormal");
    if (!world_to_camera.allFinite()) throw Error(ErrorCode::InvalidArgument, "camera extrinsics not finite");
}

CameraView make_look_at_camera(const Vec3& eye, const Vec3& target, const Vec3& up, double focal, int width,
                               int height) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = forward.cross(up);
    if (right.norm() < 1e-12) right = forward.cross(Vec3::UnitX());
    right.normalize();
    // y points down in image space.
    const Vec3 down = forward.cross(right);

    CameraView cam;
    cam.width = width;
    cam.height = height;
    cam.intrinsics << focal, 0.0, width / 2.0, 0.0, focal, height / 2.0, 0.0, 0.0, 1.0;
    Mat3 r;
    r.row(0) = right.transpose();
    r.row(1) = down.transpose();
    r.row(2) = forward.transpose();
    cam.world_to_camera.setIdentity();
    cam.world_to_camera.topLeftCorner<3, 3>() = r;
    cam.world_to_camera.topRightCorner<3, 1>() = -r * eye;
    return cam;
}

CameraView read_camera_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
        CameraView cam;
        cam.width = j.at("width").get<int>();
        cam.height = j.at("height").get<int>();
        const auto k = j.at("K").get<std::vector<std::vector<double>>>();
        const auto w = j.at("world_to_camera").get<std::vector<std::vector<double>>>();
        if (k.size() != 3 || w.size() != 4) throw Error(ErrorCode::MalformedHeader, "bad matrix size in " + path.string());
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) cam.intrinsics(r, c) = k.at(r).at(c);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) cam.world_to_camera(r, c) = w.at(r).at(c);
        cam.validate();
        return cam;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedHeader, path.string() + ": " + e.what());
    }
}

void write_camera_json(const CameraView& camera, const std::filesystem::path& path) {
    nlohmann::json j;
    j["width"] = camera.width;
    j["height"] = camera.height;
    std::vector<std::vector<double>> k(3, std::vector<double>(3)), w(4, std::vector<double>(4));
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) k[r][c] = camera.intrinsics(r, c);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) w[r][c] = camera.world_to_camera(r, c);
    j["K"] = k;
    j["world_to_camera"] = w;
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out << j.dump(2) << "\n";
}

std::vector<CameraView> read_camera_dir(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::IoFailure, "not a directory: " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<CameraView> cams;
    for (const auto& f : files) cams.push_back(read_camera_json(f));
    return cams;
}

} // namespace splatgeo
