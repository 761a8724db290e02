#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "dsdf/mc_tables.hpp"
#include "dsdf/rng.hpp"

namespace dsdf {

using Vec3 = std::array<double, 3>;

inline Vec3 operator-(const Vec3& a, const Vec3& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Vec3 operator+(const Vec3& a, const Vec3& b) {
    return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Vec3 operator*(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
inline double dot(const Vec3& a, const Vec3& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

// ---------------------------------------------------------------------------
// ShapeSpec: analytic SDF scene description (primitives + CSG), the exact
// ground-truth oracle for the whole pipeline.

struct ShapeSpec {
    enum class Kind { sphere, box, torus, csg_union, csg_intersection, csg_subtraction };

    Kind kind = Kind::sphere;
    Vec3 center{0, 0, 0};
    double radius = 0.5;        // sphere
    Vec3 half_extents{0.3, 0.3, 0.3};  // box
    double torus_major = 0.35, torus_minor = 0.12;
    std::vector<ShapeSpec> children;  // CSG nodes: exactly 2

    static const char* kind_name(Kind k) {
        switch (k) {
            case Kind::sphere: return "sphere";
            case Kind::box: return "box";
            case Kind::torus: return "torus";
            case Kind::csg_union: return "union";
            case Kind::csg_intersection: return "intersection";
            case Kind::csg_subtraction: return "subtraction";
        }
        return "?";
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["kind"] = kind_name(kind);
        switch (kind) {
            case Kind::sphere:
                j["center"] = center;
                j["radius"] = radius;
                break;
            case Kind::box:
                j["center"] = center;
                j["half_extents"] = half_extents;
                break;
            case Kind::torus:
                j["center"] = center;
                j["major_radius"] = torus_major;
                j["minor_radius"] = torus_minor;
                break;
            default: {
                nlohmann::json kids = nlohmann::json::array();
                for (const auto& c : children) kids.push_back(c.to_json());
                j["children"] = kids;
            }
        }
        return j;
    }

    static ShapeSpec from_json(const nlohmann::json& j) {
        ShapeSpec s;
        std::string k = j.at("kind");
        if (k == "sphere") {
            s.kind = Kind::sphere;
            s.center = j.at("center");
            s.radius = j.at("radius");
        } else if (k == "box") {
            s.kind = Kind::box;
            s.center = j.at("center");
            s.half_extents = j.at("half_extents");
        } else if (k == "torus") {
            s.kind = Kind::torus;
            s.center = j.at("center");
            s.torus_major = j.at("major_radius");
            s.torus_minor = j.at("minor_radius");
        } else {
            if (k == "union") s.kind = Kind::csg_union;
            else if (k == "intersection") s.kind = Kind::csg_intersection;
            else if (k == "subtraction") s.kind = Kind::csg_subtraction;
            else throw std::invalid_argument("ShapeSpec: unknown kind " + k);
            for (const auto& c : j.at("children")) s.children.push_back(from_json(c));
            if (s.children.size() != 2)
                throw std::invalid_argument("ShapeSpec: CSG node needs exactly 2 children");
        }
        return s;
    }
};

// Exact for primitives; min/max bound for CSG nodes.
inline double sdf_eval(const ShapeSpec& spec, const Vec3& x) {
    switch (spec.kind) {
        case ShapeSpec::Kind::sphere:
            return norm(x - spec.center) - spec.radius;
        case ShapeSpec::Kind::box: {
            Vec3 p = x - spec.center;
            Vec3 q{std::fabs(p[0]) - spec.half_extents[0], std::fabs(p[1]) - spec.half_extents[1],
                   std::fabs(p[2]) - spec.half_extents[2]};
            Vec3 qp{std::max(q[0], 0.0), std::max(q[1], 0.0), std::max(q[2], 0.0)};
            double outside = norm(qp);
            double inside = std::min(std::max(q[0], std::max(q[1], q[2])), 0.0);
            return outside + inside;
        }
        case ShapeSpec::Kind::torus: {
            Vec3 p = x - spec.center;
            double qxy = std::sqrt(p[0] * p[0] + p[1] * p[1]) - spec.torus_major;
            return std::sqrt(qxy * qxy + p[2] * p[2]) - spec.torus_minor;
        }
        case ShapeSpec::Kind::csg_union:
            return std::min(sdf_eval(spec.children[0], x), sdf_eval(spec.children[1], x));
        case ShapeSpec::Kind::csg_intersection:
            return std::max(sdf_eval(spec.children[0], x), sdf_eval(spec.children[1], x));
        case ShapeSpec::Kind::csg_subtraction:
            return std::max(sdf_eval(spec.children[0], x), -sdf_eval(spec.children[1], x));
    }
    return 0.0;
}

inline Vec3 sdf_gradient(const ShapeSpec& spec, const Vec3& x, double h = 1e-6) {
    Vec3 g;
    for (int i = 0; i < 3; ++i) {
        Vec3 p = x, m = x;
        p[i] += h;
        m[i] -= h;
        g[i] = (sdf_eval(spec, p) - sdf_eval(spec, m)) / (2 * h);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Point clouds

struct PointCloud {
    std::vector<Vec3> points;

    size_t size() const { return points.size(); }
};

inline void save_xyz(const PointCloud& pc, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_xyz: cannot open " + path);
    f.precision(17);
    for (const auto& p : pc.points) f << p[0] << " " << p[1] << " " << p[2] << "\n";
}

inline PointCloud load_xyz(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_xyz: cannot open " + path);
    PointCloud pc;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        Vec3 p;
        if (ss >> p[0] >> p[1] >> p[2]) pc.points.push_back(p);
    }
    return pc;
}

// Rejection + sphere-trace projection along the SDF gradient.
inline PointCloud sample_surface(const ShapeSpec& spec, int n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("sample_surface: n must be >= 1");
    PointCloud pc;
    pc.points.reserve(n);
    while (static_cast<int>(pc.points.size()) < n) {
        Vec3 p{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        bool ok = false;
        for (int it = 0; it < 64; ++it) {
            double d = sdf_eval(spec, p);
            if (std::fabs(d) < 1e-7) {
                ok = true;
                break;
            }
            Vec3 g = sdf_gradient(spec, p);
            double gn = norm(g);
            if (gn < 1e-9) break;
            p = p - g * (d / (gn * gn));
        }
        if (ok && std::fabs(sdf_eval(spec, p)) < 1e-6) pc.points.push_back(p);
    }
    return pc;
}

struct SDFSampleSet {
    std::vector<Vec3> queries;
    std::vector<double> distances;
};

// near_fraction*m surface points + Gaussian offset, rest uniform in the cube;
// ground truth always from the analytic oracle.
inline SDFSampleSet sample_queries(const ShapeSpec& spec, int m, double near_fraction,
                                   double noise_std, Rng& rng) {
    if (near_fraction < 0 || near_fraction > 1)
        throw std::invalid_argument("sample_queries: near_fraction in [0,1]");
    int n_near = static_cast<int>(std::lround(near_fraction * m));
    SDFSampleSet set;
    set.queries.reserve(m);
    if (n_near > 0) {
        PointCloud surf = sample_surface(spec, n_near, rng);
        for (auto& p : surf.points) {
            Vec3 q{p[0] + rng.normal(0, noise_std), p[1] + rng.normal(0, noise_std),
                   p[2] + rng.normal(0, noise_std)};
            set.queries.push_back(q);
        }
    }
    for (int i = n_near; i < m; ++i)
        set.queries.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    set.distances.reserve(m);
    for (const auto& q : set.queries) set.distances.push_back(sdf_eval(spec, q));
    return set;
}

// 128 -> 64 viewpoint crop: drop the 64 points furthest from a random
// direction on the unit sphere, keep the rest.
inline PointCloud crop_partial(const PointCloud& cloud, Rng& rng) {
    if (cloud.size() != 128) throw std::invalid_argument("crop_partial: input must have 128 points");
    Vec3 vp;
    double n2;
    do {
        vp = {rng.normal(), rng.normal(), rng.normal()};
        n2 = norm(vp);
    } while (n2 < 1e-9);
    vp = vp * (1.0 / n2);  // viewpoint on the unit sphere

    std::vector<std::pair<double, int>> dist(128);
    for (int i = 0; i < 128; ++i) dist[i] = {norm(cloud.points[i] - vp), i};
    std::sort(dist.begin(), dist.end());
    PointCloud out;
    out.points.reserve(64);
    for (int i = 0; i < 64; ++i) out.points.push_back(cloud.points[dist[i].second]);
    return out;
}

// ---------------------------------------------------------------------------
// Mesh + marching cubes

struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;

    bool empty() const { return triangles.empty(); }
};

inline void save_obj(const Mesh& mesh, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_obj: cannot open " + path);
    f.precision(17);
    for (const auto& v : mesh.vertices) f << "v " << v[0] << " " << v[1] << " " << v[2] << "\n";
    for (const auto& t : mesh.triangles)
        f << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
}

inline Mesh load_obj(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_obj: cannot open " + path);
    Mesh m;
    std::string line;
    while (std::getline(f, line)) {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            Vec3 v;
            ss >> v[0] >> v[1] >> v[2];
            m.vertices.push_back(v);
        } else if (tag == "f") {
            std::array<int, 3> t;
            ss >> t[0] >> t[1] >> t[2];
            m.triangles.push_back({t[0] - 1, t[1] - 1, t[2] - 1});
        }
    }
    return m;
}

// Scalar field sampled on a resolution^3 lattice over [-1,1]^3, row-major
// with x fastest.
struct GridField {
    int resolution = 0;
    std::vector<double> values;

    double at(int ix, int iy, int iz) const {
        return values[(static_cast<int64_t>(iz) * resolution + iy) * resolution + ix];
    }
    Vec3 coord(int ix, int iy, int iz) const {
        double h = 2.0 / (resolution - 1);
        return {-1.0 + ix * h, -1.0 + iy * h, -1.0 + iz * h};
    }
};

inline GridField sample_grid(const std::function<double(const Vec3&)>& f, int resolution) {
    GridField g;
    g.resolution = resolution;
    g.values.resize(static_cast<int64_t>(resolution) * resolution * resolution);
    for (int iz = 0; iz < resolution; ++iz)
        for (int iy = 0; iy < resolution; ++iy)
            for (int ix = 0; ix < resolution; ++ix)
                g.values[(static_cast<int64_t>(iz) * resolution + iy) * resolution + ix] =
                    f(g.coord(ix, iy, iz));
    return g;
}

// Full-table marching cubes at iso 0 with vertex welding on lattice edges.
// A field with no sign change yields an empty mesh (signaled, not thrown).
inline Mesh marching_cubes(const GridField& field) {
    if (field.resolution < 8) throw std::invalid_argument("marching_cubes: resolution >= 8");
    for (double v : field.values)
        if (!std::isfinite(v)) throw std::invalid_argument("marching_cubes: non-finite field");
    const int res = field.resolution;
    Mesh mesh;
    // lattice-edge id -> welded vertex index
    std::unordered_map<int64_t, int> edge_vertex;
    auto edge_id = [res](int ix, int iy, int iz, int axis) {
        return ((static_cast<int64_t>(iz) * res + iy) * res + ix) * 3 + axis;
    };
    // value==0 counts as inside so degenerate zero-corner cells stay consistent
    auto inside = [&](int ix, int iy, int iz) { return field.at(ix, iy, iz) <= 0.0; };

    for (int iz = 0; iz + 1 < res; ++iz)
        for (int iy = 0; iy + 1 < res; ++iy)
            for (int ix = 0; ix + 1 < res; ++ix) {
                int caseIdx = 0;
                for (int c = 0; c < 8; ++c) {
                    const int* o = detail::kMcCorner[c];
                    if (inside(ix + o[0], iy + o[1], iz + o[2])) caseIdx |= 1 << c;
                }
                const int* tris = detail::kMcTriTable[caseIdx];
                for (int k = 0; tris[k] >= 0; k += 3) {
                    std::array<int, 3> tri;
                    for (int v = 0; v < 3; ++v) {
                        int e = tris[k + v];
                        const int* ca = detail::kMcCorner[detail::kMcEdge[e][0]];
                        const int* cb = detail::kMcCorner[detail::kMcEdge[e][1]];
                        int ax = ix + std::min(ca[0], cb[0]);
                        int ay = iy + std::min(ca[1], cb[1]);
                        int az = iz + std::min(ca[2], cb[2]);
                        int axis = ca[0] != cb[0] ? 0 : (ca[1] != cb[1] ? 1 : 2);
                        int64_t id = edge_id(ax, ay, az, axis);
                        auto it = edge_vertex.find(id);
                        if (it == edge_vertex.end()) {
                            // interpolate along the sign-changing lattice edge
                            int bx = ax + (axis == 0), by = ay + (axis == 1), bz = az + (axis == 2);
                            double va = field.at(ax, ay, az);
                            double vb = field.at(bx, by, bz);
                            double t = (va - vb) == 0.0 ? 0.5 : va / (va - vb);
                            Vec3 pa = field.coord(ax, ay, az);
                            Vec3 pb = field.coord(bx, by, bz);
                            Vec3 p = pa + (pb - pa) * t;
                            it = edge_vertex.emplace(id, static_cast<int>(mesh.vertices.size())).first;
                            mesh.vertices.push_back(p);
                        }
                        tri[v] = it->second;
                    }
                    // drop degenerate triangles (repeated welded vertices)
                    if (tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2])
                        mesh.triangles.push_back(tri);
                }
            }
    return mesh;
}

// Area-uniform surface sampling: triangle chosen proportional to area,
// barycentric-uniform within.
inline PointCloud mesh_sample_points(const Mesh& mesh, int n, Rng& rng) {
    if (mesh.empty()) throw std::invalid_argument("mesh_sample_points: empty mesh");
    std::vector<double> cum(mesh.triangles.size());
    double total = 0;
    for (size_t i = 0; i < mesh.triangles.size(); ++i) {
        const auto& t = mesh.triangles[i];
        Vec3 e1 = mesh.vertices[t[1]] - mesh.vertices[t[0]];
        Vec3 e2 = mesh.vertices[t[2]] - mesh.vertices[t[0]];
        total += 0.5 * norm(cross(e1, e2));
        cum[i] = total;
    }
    PointCloud pc;
    pc.points.reserve(n);
    for (int i = 0; i < n; ++i) {
        double r = rng.uniform(0, total);
        size_t k = std::lower_bound(cum.begin(), cum.end(), r) - cum.begin();
        if (k >= mesh.triangles.size()) k = mesh.triangles.size() - 1;
        const auto& t = mesh.triangles[k];
        double u = rng.uniform(), v = rng.uniform();
        if (u + v > 1) {
            u = 1 - u;
            v = 1 - v;
        }
        Vec3 p = mesh.vertices[t[0]] + (mesh.vertices[t[1]] - mesh.vertices[t[0]]) * u +
                 (mesh.vertices[t[2]] - mesh.vertices[t[0]]) * v;
        pc.points.push_back(p);
    }
    return pc;
}

// ---------------------------------------------------------------------------
// Nearest-neighbor machinery (exact KD-tree) and point-set distances.

class KdTree {
public:
    explicit KdTree(const std::vector<Vec3>& pts) : pts_(pts) {
        idx_.resize(pts.size());
        for (size_t i = 0; i < pts.size(); ++i) idx_[i] = static_cast<int>(i);
        nodes_.reserve(pts.size() * 2);
        root_ = build(0, static_cast<int>(pts.size()), 0);
    }

    // squared distance to the nearest point
    double nearest_sq(const Vec3& q) const {
        double best = std::numeric_limits<double>::infinity();
        search(root_, q, best);
        return best;
    }

private:
    struct Node {
        int axis, point;
        int left = -1, right = -1;
    };

    int build(int lo, int hi, int depth) {
        if (lo >= hi) return -1;
        int axis = depth % 3;
        int mid = (lo + hi) / 2;
        std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi,
                         [&](int a, int b) { return pts_[a][axis] < pts_[b][axis]; });
        int id = static_cast<int>(nodes_.size());
        nodes_.push_back({axis, idx_[mid]});
        nodes_[id].left = build(lo, mid, depth + 1);
        nodes_[id].right = build(mid + 1, hi, depth + 1);
        return id;
    }

    void search(int node, const Vec3& q, double& best) const {
        if (node < 0) return;
        const Node& n = nodes_[node];
        const Vec3& p = pts_[n.point];
        Vec3 d = q - p;
        best = std::min(best, dot(d, d));
        double delta = q[n.axis] - p[n.axis];
        int near = delta < 0 ? n.left : n.right;
        int far = delta < 0 ? n.right : n.left;
        search(near, q, best);
        if (delta * delta < best) search(far, q, best);
    }

    const std::vector<Vec3>& pts_;
    std::vector<int> idx_;
    std::vector<Node> nodes_;
    int root_;
};

// Squared-distance Chamfer: mean over a of min squared distance to b, plus
// the reverse term.
inline double chamfer_distance(const PointCloud& a, const PointCloud& b) {
    if (a.points.empty() || b.points.empty())
        throw std::invalid_argument("chamfer_distance: empty cloud");
    KdTree ta(a.points), tb(b.points);
    double ab = 0, ba = 0;
    for (const auto& p : a.points) ab += tb.nearest_sq(p);
    for (const auto& p : b.points) ba += ta.nearest_sq(p);
    return ab / a.points.size() + ba / b.points.size();
}

// Max over partial points of the distance to the nearest complete point.
inline double hausdorff_unidirectional(const PointCloud& partial, const PointCloud& complete) {
    if (partial.points.empty() || complete.points.empty())
        throw std::invalid_argument("hausdorff_unidirectional: empty cloud");
    KdTree tc(complete.points);
    double worst = 0;
    for (const auto& p : partial.points) worst = std::max(worst, tc.nearest_sq(p));
    return std::sqrt(worst);
}

}  // namespace dsdf
