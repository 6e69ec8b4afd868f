#include "splatgeo/mesh.hpp"

#include "splatgeo/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

namespace splatgeo {

void TriMesh::validate() const {
    for (const auto& v : vertices)
        if (!v.allFinite()) throw Error(ErrorCode::InvalidArgument, "mesh has a non-finite vertex");
    for (const auto& t : triangles)
        for (auto i : t)
            if (i >= vertices.size()) throw Error(ErrorCode::InvalidArgument, "mesh triangle index out of range");
}

double TriMesh::area() const {
    double a = 0.0;
    for (const auto& t : triangles)
        a += 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
    return a;
}

Vec3 TriMesh::bbox_min() const {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    for (const auto& v : vertices) lo = lo.cwiseMin(v);
    return lo;
}

Vec3 TriMesh::bbox_max() const {
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
    for (const auto& v : vertices) hi = hi.cwiseMax(v);
    return hi;
}

void write_ply(const TriMesh& mesh, const std::filesystem::path& path, PlyFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out << "ply\nformat " << (format == PlyFormat::Ascii ? "ascii" : "binary_little_endian") << " 1.0\n";
    out << "element vertex " << mesh.vertices.size() << "\nproperty double x\nproperty double y\nproperty double z\n";
    out << "element face " << mesh.triangles.size() << "\nproperty list uchar uint vertex_indices\nend_header\n";
    if (format == PlyFormat::Ascii) {
        out.precision(17);
        for (const auto& v : mesh.vertices) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
        for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    } else {
        for (const auto& v : mesh.vertices) out.write(reinterpret_cast<const char*>(v.data()), 3 * sizeof(double));
        for (const auto& t : mesh.triangles) {
            const std::uint8_t n = 3;
            out.write(reinterpret_cast<const char*>(&n), 1);
            out.write(reinterpret_cast<const char*>(t.data()), 3 * sizeof(std::uint32_t));
        }
    }
    if (!out) throw Error(ErrorCode::IoFailure, "failed writing " + path.string());
}

namespace {

struct PlyProperty {
    std::string name;
    std::string type;
    bool is_list = false;
    std::string count_type;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;
};

std::size_t type_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" || t == "float32") return 4;
    if (t == "double" || t == "float64") return 8;
    throw Error(ErrorCode::MalformedHeader, "unknown PLY type " + t);
}

double read_binary(std::istream& in, const std::string& t) {
    unsigned char buf[8];
    const std::size_t n = type_size(t);
    in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n));
    if (!in) throw Error(ErrorCode::MalformedHeader, "truncated PLY body");
    auto as = [&](auto v) {
        std::memcpy(&v, buf, sizeof(v));
        return static_cast<double>(v);
    };
    if (t == "char" || t == "int8") return as(std::int8_t{});
    if (t == "uchar" || t == "uint8") return as(std::uint8_t{});
    if (t == "short" || t == "int16") return as(std::int16_t{});
    if (t == "ushort" || t == "uint16") return as(std::uint16_t{});
    if (t == "int" || t == "int32") return as(std::int32_t{});
    if (t == "uint" || t == "uint32") return as(std::uint32_t{});
    if (t == "float" || t == "float32") return as(float{});
    return as(double{});
}

} // namespace

TriMesh read_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "ply") throw Error(ErrorCode::MalformedHeader, path.string() + " is not a PLY file");
    bool ascii = false;
    std::vector<PlyElement> elements;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "ascii") ascii = true;
            else if (fmt != "binary_little_endian")
                throw Error(ErrorCode::MalformedHeader, "unsupported PLY format " + fmt);
        } else if (word == "element") {
            PlyElement e;
            ls >> e.name >> e.count;
            elements.push_back(e);
        } else if (word == "property") {
            if (elements.empty()) throw Error(ErrorCode::MalformedHeader, "PLY property before element");
            PlyProperty p;
            std::string t;
            ls >> t;
            if (t == "list") {
                p.is_list = true;
                ls >> p.count_type >> p.type >> p.name;
            } else {
                p.type = t;
                ls >> p.name;
            }
            elements.back().props.push_back(p);
        } else if (word == "end_header") {
            break;
        }
    }

    TriMesh mesh;
    for (const auto& e : elements) {
        for (std::size_t r = 0; r < e.count; ++r) {
            Vec3 v = Vec3::Zero();
            for (const auto& p : e.props) {
                if (p.is_list) {
                    std::size_t n;
                    if (ascii) {
                        in >> n;
                    } else {
                        n = static_cast<std::size_t>(read_binary(in, p.count_type));
                    }
                    std::vector<std::uint32_t> idx(n);
                    for (auto& i : idx) {
                        double value;
                        if (ascii) in >> value;
                        else value = read_binary(in, p.type);
                        i = static_cast<std::uint32_t>(value);
                    }
                    if (e.name == "face" && p.name.rfind("vertex_ind", 0) == 0)
                        for (std::size_t k = 1; k + 1 < n; ++k) mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
                    continue;
                }
                double value;
                if (ascii) in >> value;
                else value = read_binary(in, p.type);
                if (e.name == "vertex") {
                    if (p.name == "x") v.x() = value;
                    else if (p.name == "y") v.y() = value;
                    else if (p.name == "z") v.z() = value;
                }
            }
            if (!in) throw Error(ErrorCode::MalformedHeader, "truncated PLY body in " + path.string());
            if (e.name == "vertex") mesh.vertices.push_back(v);
        }
    }
    mesh.validate();
    return mesh;
}

TriMesh make_rectangle_mesh(const Vec3& center, double half_x, double half_y, double spacing) {
    const int nx = std::max(1, static_cast<int>(std::ceil(2.0 * half_x / spacing)));
    const int ny = std::max(1, static_cast<int>(std::ceil(2.0 * half_y / spacing)));
    TriMesh m;
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
            m.vertices.emplace_back(center.x() - half_x + 2.0 * half_x * i / nx,
                                    center.y() - half_y + 2.0 * half_y * j / ny, center.z());
    auto id = [&](int i, int j) { return static_cast<std::uint32_t>(j * (nx + 1) + i); };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            m.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            m.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    return m;
}

TriMesh make_sphere_mesh(const Vec3& center, double radius, double spacing) {
    const int rings = std::max(4, static_cast<int>(std::ceil(kPi * radius / spacing)));
    const int segments = std::max(8, static_cast<int>(std::ceil(2.0 * kPi * radius / spacing)));
    TriMesh m;
    m.vertices.push_back(center + Vec3(0, 0, radius));
    for (int r = 1; r < rings; ++r) {
        const double theta = kPi * r / rings;
        for (int s = 0; s < segments; ++s) {
            const double phi = 2.0 * kPi * s / segments;
            m.vertices.push_back(center + radius * Vec3(std::sin(theta) * std::cos(phi),
                                                        std::sin(theta) * std::sin(phi), std::cos(theta)));
        }
    }
    m.vertices.push_back(center - Vec3(0, 0, radius));
    const auto south = static_cast<std::uint32_t>(m.vertices.size() - 1);
    auto id = [&](int r, int s) { return static_cast<std::uint32_t>(1 + (r - 1) * segments + (s % segments)); };
    for (int s = 0; s < segments; ++s) m.triangles.push_back({0, id(1, s), id(1, s + 1)});
    for (int r = 1; r + 1 < rings; ++r)
        for (int s = 0; s < segments; ++s) {
            m.triangles.push_back({id(r, s), id(r + 1, s), id(r + 1, s + 1)});
            m.triangles.push_back({id(r, s), id(r + 1, s + 1), id(r, s + 1)});
        }
    for (int s = 0; s < segments; ++s) m.triangles.push_back({south, id(rings - 1, s + 1), id(rings - 1, s)});
    return m;
}

TriMesh crop_mesh(const TriMesh& mesh, const Vec3& lo, const Vec3& hi) {
    auto inside = [&](const Vec3& v) { return (v.array() >= lo.array()).all() && (v.array() <= hi.array()).all(); };
    std::vector<std::int64_t> remap(mesh.vertices.size(), -1);
    TriMesh out;
    for (const auto& t : mesh.triangles) {
        if (!inside(mesh.vertices[t[0]]) || !inside(mesh.vertices[t[1]]) || !inside(mesh.vertices[t[2]])) continue;
        std::array<std::uint32_t, 3> nt;
        for (int k = 0; k < 3; ++k) {
            auto& r = remap[t[k]];
            if (r < 0) {
                r = static_cast<std::int64_t>(out.vertices.size());
                out.vertices.push_back(mesh.vertices[t[k]]);
            }
            nt[k] = static_cast<std::uint32_t>(r);
        }
        out.triangles.push_back(nt);
    }
    return out;
}

std::vector<Vec3> sample_surface(const TriMesh& mesh, std::size_t count, std::uint64_t seed) {
    if (mesh.triangles.empty()) throw Error(ErrorCode::EmptyMesh, "cannot sample a mesh without triangles");
    std::vector<double> cumulative(mesh.triangles.size());
    double total = 0.0;
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
        const auto& t = mesh.triangles[i];
        total += 0.5 * (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]).norm();
        cumulative[i] = total;
    }
    if (!(total > 0.0)) throw Error(ErrorCode::EmptyMesh, "mesh has zero area");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec3> pts;
    pts.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double pick = u(rng) * total;
        const std::size_t i = std::min<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin(), cumulative.size() - 1);
        const auto& t = mesh.triangles[i];
        double a = u(rng), b = u(rng);
        if (a + b > 1.0) {
            a = 1.0 - a;
            b = 1.0 - b;
        }
        pts.push_back(mesh.vertices[t[0]] + a * (mesh.vertices[t[1]] - mesh.vertices[t[0]]) +
                      b * (mesh.vertices[t[2]] - mesh.vertices[t[0]]));
    }
    return pts;
}

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    if (!points_.empty()) build(0, static_cast<std::uint32_t>(points_.size()), 0);
}

int KdTree::build(std::uint32_t begin, std::uint32_t end, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({begin, end});
    if (end - begin <= 8) return id;
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    for (std::uint32_t i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis;
    (hi - lo).maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
    nodes_[id].axis = axis;
    nodes_[id].split = points_[order_[mid]][axis];
    const int left = build(begin, mid, depth + 1);
    const int right = build(mid, end, depth + 1);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void KdTree::search(int node_id, const Vec3& q, std::size_t& best, double& best_d2) const {
    const Node& node = nodes_[node_id];
    if (node.left < 0) {
        for (std::uint32_t i = node.begin; i < node.end; ++i) {
            const double d2 = (points_[order_[i]] - q).squaredNorm();
            if (d2 < best_d2 || (d2 == best_d2 && order_[i] < best)) {
                best_d2 = d2;
                best = order_[i];
            }
        }
        return;
    }
    const double diff = q[node.axis] - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    search(near, q, best, best_d2);
    if (diff * diff <= best_d2) search(far, q, best, best_d2);
}

std::pair<std::size_t, double> KdTree::nearest(const Vec3& query) const {
    if (points_.empty()) throw Error(ErrorCode::EmptyMesh, "nearest-neighbour query on an empty point set");
    std::size_t best = std::numeric_limits<std::size_t>::max();
    double best_d2 = std::numeric_limits<double>::infinity();
    search(0, query, best, best_d2);
    return {best, best_d2};
}

double KdTree::nearest_distance(const Vec3& query) const { return std::sqrt(nearest(query).second); }

double brute_force_nearest_distance(const std::vector<Vec3>& points, const Vec3& query) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : points) best = std::min(best, (p - query).squaredNorm());
    return std::sqrt(best);
}

} // namespace splatgeo
