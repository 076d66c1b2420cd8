// Triangulated meshes carry the topology of the configuration surface: the
// Euler-Poincare characteristic and the count of boundary loops. Dynamics
// never touches the mesh; it lives entirely in charts.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "surforbit/errors.hpp"
#include "surforbit/vec.hpp"

namespace surforbit {

struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;     // 0-based vertex indices
    std::vector<std::array<int, 2>> segments;  // 1-complex edges (no faces)

    bool empty() const { return vertices.empty(); }
};

namespace detail {

inline std::array<int, 2> sorted_edge(int a, int b) {
    return {std::min(a, b), std::max(a, b)};
}

// Undirected edge -> number of incident faces.
inline std::map<std::array<int, 2>, int> edge_face_counts(const Mesh& mesh) {
    std::map<std::array<int, 2>, int> counts;
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            int a = f[k], b = f[(k + 1) % 3];
            if (a == b) throw MeshError("degenerate face with repeated vertex " + std::to_string(a));
            ++counts[sorted_edge(a, b)];
        }
    }
    for (const auto& s : mesh.segments) counts.emplace(sorted_edge(s[0], s[1]), 0);
    return counts;
}

}  // namespace detail

// Checks the complex is valid: indices in range, every face edge bounds one
// or two faces, and boundary edges (one face) close up into loops.
inline void validate_mesh(const Mesh& mesh) {
    const int nv = static_cast<int>(mesh.vertices.size());
    auto check_index = [nv](int i) {
        if (i < 0 || i >= nv)
            throw MeshError("vertex index " + std::to_string(i + 1) + " out of range");
    };
    for (const auto& f : mesh.faces)
        for (int i : f) check_index(i);
    for (const auto& s : mesh.segments)
        for (int i : s) check_index(i);

    auto counts = detail::edge_face_counts(mesh);
    std::map<int, int> boundary_degree;
    for (const auto& [edge, n] : counts) {
        if (!mesh.faces.empty() && n > 2)
            throw MeshError("non-manifold edge (" + std::to_string(edge[0] + 1) + "," +
                            std::to_string(edge[1] + 1) + ") bounds " + std::to_string(n) +
                            " faces");
        if (n == 1) {
            ++boundary_degree[edge[0]];
            ++boundary_degree[edge[1]];
        }
    }
    // A boundary vertex of a valid 2-complex has exactly two boundary edges.
    for (const auto& [v, deg] : boundary_degree)
        if (deg != 2)
            throw MeshError("boundary does not close into loops at vertex " +
                            std::to_string(v + 1));
}

// V - E + F. Faces contribute their edges; explicit segments count as edges
// for 1-complexes (e.g. the half-circle configuration space).
inline int euler_characteristic(const Mesh& mesh) {
    validate_mesh(mesh);
    auto counts = detail::edge_face_counts(mesh);
    return static_cast<int>(mesh.vertices.size()) - static_cast<int>(counts.size()) +
           static_cast<int>(mesh.faces.size());
}

// Number of closed boundary loops (edges incident to exactly one face).
inline int boundary_loop_count(const Mesh& mesh) {
    validate_mesh(mesh);
    auto counts = detail::edge_face_counts(mesh);
    std::map<int, std::vector<int>> adj;
    for (const auto& [edge, n] : counts) {
        if (n == 1) {
            adj[edge[0]].push_back(edge[1]);
            adj[edge[1]].push_back(edge[0]);
        }
    }
    std::set<int> unvisited;
    for (const auto& [v, _] : adj) unvisited.insert(v);
    int loops = 0;
    while (!unvisited.empty()) {
        ++loops;
        int start = *unvisited.begin();
        int prev = -1, cur = start;
        do {
            unvisited.erase(cur);
            const auto& nb = adj[cur];
            int next = (nb[0] == prev) ? nb[1] : nb[0];
            prev = cur;
            cur = next;
        } while (cur != start && unvisited.count(cur));
    }
    return loops;
}

// Fixed-point index of the time-T map on the block built over this surface:
// chi(W_0) - chi(W_0^-). The exit set retracts onto the boundary circles, so
// its characteristic vanishes and the index equals chi(M).
inline int exit_index(const Mesh& mesh, int /*boundary_loops*/) {
    return euler_characteristic(mesh);
}

// ---- ASCII face-vertex format ----
// Vertex lines "v x y z", triangle lines "f i j k" (1-indexed), optional
// segment lines "l i j". '#' starts a comment.

inline Mesh parse_mesh(std::istream& in, const std::string& source_name = "<mesh>") {
    Mesh mesh;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        auto complain = [&](const std::string& what) {
            throw MeshError(source_name + ":" + std::to_string(line_no) + ": " + what);
        };
        if (tag == "v") {
            Vec3 p;
            if (!(ls >> p[0] >> p[1] >> p[2])) complain("expected three coordinates");
            mesh.vertices.push_back(p);
        } else if (tag == "f") {
            std::array<int, 3> f{};
            if (!(ls >> f[0] >> f[1] >> f[2])) complain("expected three vertex indices");
            for (int& i : f) --i;
            mesh.faces.push_back(f);
        } else if (tag == "l") {
            std::array<int, 2> s{};
            if (!(ls >> s[0] >> s[1])) complain("expected two vertex indices");
            for (int& i : s) --i;
            mesh.segments.push_back(s);
        } else {
            complain("unknown record '" + tag + "'");
        }
    }
    return mesh;
}

inline Mesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open mesh file '" + path + "'");
    return parse_mesh(in, path);
}

inline std::string serialize_mesh(const Mesh& mesh) {
    std::ostringstream out;
    char buf[128];
    for (const auto& p : mesh.vertices) {
        std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", p[0], p[1], p[2]);
        out << buf;
    }
    for (const auto& f : mesh.faces)
        out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
    for (const auto& s : mesh.segments) out << "l " << s[0] + 1 << " " << s[1] + 1 << "\n";
    return out.str();
}

// ---- Builders for the built-in topologies ----

inline Mesh octahedron_mesh(double radius = 1.0) {
    Mesh m;
    m.vertices = {Vec3{{radius, 0, 0}}, Vec3{{-radius, 0, 0}}, Vec3{{0, radius, 0}},
                  Vec3{{0, -radius, 0}}, Vec3{{0, 0, radius}}, Vec3{{0, 0, -radius}}};
    m.faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
               {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    return m;
}

// Triangulated polar cap: `rings` concentric rings, `sectors` sectors, vertex
// positions supplied by the embedding callback (fraction in [0,1], angle).
inline Mesh disk_mesh(int rings, int sectors,
                      const std::function<Vec3(double, double)>& embed) {
    Mesh m;
    m.vertices.push_back(embed(0.0, 0.0));
    for (int r = 1; r <= rings; ++r)
        for (int s = 0; s < sectors; ++s) {
            double frac = static_cast<double>(r) / rings;
            double ang = 2.0 * 3.14159265358979323846 * s / sectors;
            m.vertices.push_back(embed(frac, ang));
        }
    auto ring_vertex = [&](int r, int s) {
        if (r == 0) return 0;
        return 1 + (r - 1) * sectors + ((s % sectors + sectors) % sectors);
    };
    for (int s = 0; s < sectors; ++s)
        m.faces.push_back({0, ring_vertex(1, s), ring_vertex(1, s + 1)});
    for (int r = 1; r < rings; ++r)
        for (int s = 0; s < sectors; ++s) {
            int a = ring_vertex(r, s), b = ring_vertex(r, s + 1);
            int c = ring_vertex(r + 1, s), d = ring_vertex(r + 1, s + 1);
            m.faces.push_back({a, c, d});
            m.faces.push_back({a, d, b});
        }
    return m;
}

inline Mesh annulus_mesh(int rings, int sectors,
                         const std::function<Vec3(double, double)>& embed) {
    Mesh m;
    for (int r = 0; r <= rings; ++r)
        for (int s = 0; s < sectors; ++s) {
            double frac = static_cast<double>(r) / rings;
            double ang = 2.0 * 3.14159265358979323846 * s / sectors;
            m.vertices.push_back(embed(frac, ang));
        }
    auto vid = [&](int r, int s) { return r * sectors + ((s % sectors + sectors) % sectors); };
    for (int r = 0; r < rings; ++r)
        for (int s = 0; s < sectors; ++s) {
            int a = vid(r, s), b = vid(r, s + 1), c = vid(r + 1, s), d = vid(r + 1, s + 1);
            m.faces.push_back({a, c, d});
            m.faces.push_back({a, d, b});
        }
    return m;
}

inline Mesh torus_mesh(int major, int minor, double R = 1.0, double r = 0.3) {
    Mesh m;
    constexpr double tau = 2.0 * 3.14159265358979323846;
    for (int i = 0; i < major; ++i)
        for (int j = 0; j < minor; ++j) {
            double u = tau * i / major, v = tau * j / minor;
            m.vertices.push_back(Vec3{{(R + r * std::cos(v)) * std::cos(u),
                                       (R + r * std::cos(v)) * std::sin(u),
                                       r * std::sin(v)}});
        }
    auto vid = [&](int i, int j) {
        return ((i % major + major) % major) * minor + ((j % minor + minor) % minor);
    };
    for (int i = 0; i < major; ++i)
        for (int j = 0; j < minor; ++j) {
            int a = vid(i, j), b = vid(i + 1, j), c = vid(i, j + 1), d = vid(i + 1, j + 1);
            m.faces.push_back({a, b, d});
            m.faces.push_back({a, d, c});
        }
    return m;
}

// 1-complex path for one-dimensional configuration spaces.
inline Mesh path_mesh(int edges, const std::function<Vec3(double)>& embed) {
    Mesh m;
    for (int i = 0; i <= edges; ++i)
        m.vertices.push_back(embed(static_cast<double>(i) / edges));
    for (int i = 0; i < edges; ++i) m.segments.push_back({i, i + 1});
    return m;
}

// Glues a triangle fan over every boundary edge (caps a one-loop boundary).
inline Mesh close_boundary_with_disk(const Mesh& mesh, const Vec3& apex) {
    Mesh out = mesh;
    auto counts = detail::edge_face_counts(mesh);
    int apex_id = static_cast<int>(out.vertices.size());
    out.vertices.push_back(apex);
    for (const auto& [edge, n] : counts)
        if (n == 1) out.faces.push_back({edge[0], edge[1], apex_id});
    return out;
}

}  // namespace surforbit
