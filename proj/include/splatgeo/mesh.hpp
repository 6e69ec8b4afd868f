#pragma once

#include "splatgeo/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace splatgeo {

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;

    bool empty() const { return vertices.empty(); }
    // Throws InvalidArgument on out-of-range indices or non-finite vertices.
    void validate() const;
    double area() const;
    Vec3 bbox_min() const;
    Vec3 bbox_max() const;
};

enum class PlyFormat { Ascii, BinaryLittleEndian };

void write_ply(const TriMesh& mesh, const std::filesystem::path& path, PlyFormat format = PlyFormat::BinaryLittleEndian);
// Reads vertex x/y/z (float or double) and triangle faces; other properties
// are skipped.
TriMesh read_ply(const std::filesystem::path& path);

// Axis-aligned rectangle in the plane z = depth, split into cells of about
// `spacing`, two triangles per cell.
TriMesh make_rectangle_mesh(const Vec3& center, double half_x, double half_y, double spacing);

// Latitude/longitude sphere with roughly `spacing` edge length.
TriMesh make_sphere_mesh(const Vec3& center, double radius, double spacing);

// Keeps triangles whose three vertices lie in the box; unused vertices dropped.
TriMesh crop_mesh(const TriMesh& mesh, const Vec3& lo, const Vec3& hi);

// Area-weighted uniform samples on the surface, seeded.
std::vector<Vec3> sample_surface(const TriMesh& mesh, std::size_t count, std::uint64_t seed);

// Exact nearest-neighbour queries over a fixed point set.
class KdTree {
public:
    explicit KdTree(std::vector<Vec3> points);

    std::size_t size() const { return points_.size(); }
    // Index and squared distance of the nearest point.
    std::pair<std::size_t, double> nearest(const Vec3& query) const;
    double nearest_distance(const Vec3& query) const;

private:
    struct Node {
        std::uint32_t begin, end; // range in order_
        std::int32_t left = -1, right = -1;
        int axis = 0;
        double split = 0.0;
    };
    int build(std::uint32_t begin, std::uint32_t end, int depth);
    void search(int node, const Vec3& q, std::size_t& best, double& best_d2) const;

    std::vector<Vec3> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

// Brute-force nearest distance, for checking the tree.
double brute_force_nearest_distance(const std::vector<Vec3>& points, const Vec3& query);

} // namespace splatgeo
