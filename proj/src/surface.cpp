#include "fawn/surface.hpp"

#include <cmath>
#include <unordered_map>

#include <Eigen/Geometry>

#include "fawn/detail/rng.hpp"

namespace fawn {

namespace {

// Local cell topology. Corner bits: bit0 = +x, bit1 = +y, bit2 = +z.
// Edge e runs along edge_axis[e] from corner edge_corner[e] (bit clear).
struct CellTopology {
    int edge_axis[12];
    int edge_corner[12];
    int edge_from_corners[8][8];

    constexpr CellTopology() : edge_axis{}, edge_corner{}, edge_from_corners{} {
        for (int a = 0; a < 8; ++a) {
            for (int b = 0; b < 8; ++b) edge_from_corners[a][b] = -1;
        }
        int id = 0;
        for (int axis = 0; axis < 3; ++axis) {
            for (int c = 0; c < 8; ++c) {
                if (c & (1 << axis)) continue;
                int c1 = c | (1 << axis);
                edge_axis[id] = axis;
                edge_corner[id] = c;
                edge_from_corners[c][c1] = id;
                edge_from_corners[c1][c] = id;
                ++id;
            }
        }
    }
};

constexpr CellTopology kCell{};

struct Segment {
    int from_edge;  // local edge id
    int to_edge;
};

// Marching squares on one cell face, emitting directed segments whose left
// side (viewed along the outward face normal) is the positive region.
// `corner(p,q)` maps face coordinates to local cell corners.
void face_segments(const double vals[8], int face_axis, int side, Segment out[2], int& n_out) {
    n_out = 0;
    const int b1 = face_axis == 0 ? 1 : 0;
    const int b2 = face_axis == 2 ? 1 : 2;
    auto corner = [&](int p, int q) { return (side << face_axis) | (p << b1) | (q << b2); };

    const double v00 = vals[corner(0, 0)];
    const double v10 = vals[corner(1, 0)];
    const double v01 = vals[corner(0, 1)];
    const double v11 = vals[corner(1, 1)];
    const bool p00 = v00 > 0, p10 = v10 > 0, p01 = v01 > 0, p11 = v11 > 0;
    const int npos = int(p00) + int(p10) + int(p01) + int(p11);
    if (npos == 0 || npos == 4) return;

    // e_b1 x e_b2 = sigma * e_axis; frame is right-handed w.r.t. the outward
    // normal iff sigma matches the face direction
    const int sigma = face_axis == 1 ? -1 : 1;
    const int dir = side == 1 ? 1 : -1;
    const double handed = sigma * dir;

    struct Pt {
        double p, q;
        int edge;
    };
    // crossing on the face side from (p0,q0) to (p1,q1), nullopt-style via ok
    auto crossing = [&](int p0, int q0, int p1, int q1, Pt& pt) {
        double a = vals[corner(p0, q0)];
        double b = vals[corner(p1, q1)];
        if ((a > 0) == (b > 0)) return false;
        double t = a / (a - b);
        pt.p = p0 + t * (p1 - p0);
        pt.q = q0 + t * (q1 - q0);
        pt.edge = kCell.edge_from_corners[corner(p0, q0)][corner(p1, q1)];
        return true;
    };

    Pt bottom, top, left, right;
    bool has_bottom = crossing(0, 0, 1, 0, bottom);
    bool has_top = crossing(0, 1, 1, 1, top);
    bool has_left = crossing(0, 0, 0, 1, left);
    bool has_right = crossing(1, 0, 1, 1, right);

    // Direct P->Q so that the reference corner sits on the requested side.
    auto emit = [&](const Pt& P, const Pt& Q, int ref_corner_p, int ref_corner_q,
                    bool ref_on_left) {
        double dp = Q.p - P.p, dq = Q.q - P.q;
        double lp = -dq * handed, lq = dp * handed;  // left normal in face coords
        double rp = ref_corner_p - 0.5 * (P.p + Q.p);
        double rq = ref_corner_q - 0.5 * (P.q + Q.q);
        bool on_left = (rp * lp + rq * lq) > 0.0;
        if (on_left == ref_on_left) {
            out[n_out++] = {P.edge, Q.edge};
        } else {
            out[n_out++] = {Q.edge, P.edge};
        }
    };

    const bool ambiguous = npos == 2 && (p00 == p11) && (p10 == p01);
    if (!ambiguous) {
        // exactly two crossings; the positive corners lie strictly on one side
        Pt pts[4];
        int n = 0;
        if (has_bottom) pts[n++] = bottom;
        if (has_top) pts[n++] = top;
        if (has_left) pts[n++] = left;
        if (has_right) pts[n++] = right;
        int rp = p00 ? 0 : (p10 ? 1 : (p01 ? 0 : 1));
        int rq = p00 ? 0 : (p10 ? 0 : (p01 ? 1 : 1));
        emit(pts[0], pts[1], rp, rq, /*ref_on_left=*/true);
        return;
    }

    // Diagonal case: the asymptotic decider keeps the diagonal whose corner
    // product dominates connected through the face center. The saddle value
    // (v00*v11 - v10*v01) / (v00 + v11 - v10 - v01) shares the sign of the
    // (0,0)/(1,1) corners exactly when the numerator is positive, for either
    // polarity, so the numerator alone picks the pairing.
    if (v00 * v11 - v10 * v01 > 0.0) {
        // (0,0)-(1,1) region connects: isolate (1,0) and (0,1)
        emit(bottom, right, 1, 0, /*ref_on_left=*/p10);
        emit(top, left, 0, 1, /*ref_on_left=*/p01);
    } else {
        // (1,0)-(0,1) region connects: isolate (0,0) and (1,1)
        emit(bottom, left, 0, 0, /*ref_on_left=*/p00);
        emit(top, right, 1, 1, /*ref_on_left=*/p11);
    }
}

}  // namespace

TriangleMesh marching_cubes(const TsdfVolume& vol, double iso) {
    const GridSpec& s = vol.spec();
    const int nx = s.dims.x(), ny = s.dims.y(), nz = s.dims.z();
    const std::size_t n = s.voxel_count();

    // shift by iso and nudge exact zeros off the surface
    const double nudge = 1e-12 * s.truncation;
    std::vector<double> f(n);
    {
        std::span<const double> raw = vol.values();
        for (std::size_t i = 0; i < n; ++i) {
            double v = raw[i] - iso;
            f[i] = v == 0.0 ? nudge : v;
        }
    }

    TriangleMesh mesh;
    std::unordered_map<std::size_t, int> edge_vertex;  // global edge key -> vertex id
    const std::size_t plane = static_cast<std::size_t>(nx) * ny;
    const std::size_t axis_stride[3] = {1, static_cast<std::size_t>(nx), plane};

    auto vertex_on_edge = [&](int i, int j, int k, int axis) {
        std::size_t base = s.index(i, j, k);
        std::size_t key = static_cast<std::size_t>(axis) * n + base;
        auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        double f0 = f[base];
        double f1 = f[base + axis_stride[axis]];
        double t = f0 / (f0 - f1);
        Eigen::Vector3d p = s.voxel_center(i, j, k);
        p[axis] += t * s.voxel_size;
        int id = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(p);
        edge_vertex.emplace(key, id);
        return id;
    };

    double vals[8];
    Segment segs[12];
    int loop_edges[13];
    for (int k = 0; k + 1 < nz; ++k) {
        for (int j = 0; j + 1 < ny; ++j) {
            for (int i = 0; i + 1 < nx; ++i) {
                std::size_t base = s.index(i, j, k);
                vals[0] = f[base];
                vals[1] = f[base + 1];
                vals[2] = f[base + axis_stride[1]];
                vals[3] = f[base + axis_stride[1] + 1];
                vals[4] = f[base + plane];
                vals[5] = f[base + plane + 1];
                vals[6] = f[base + plane + axis_stride[1]];
                vals[7] = f[base + plane + axis_stride[1] + 1];

                int mask = 0;
                for (int c = 0; c < 8; ++c) mask |= (vals[c] > 0.0) << c;
                if (mask == 0 || mask == 0xff) continue;

                int n_segs = 0;
                for (int axis = 0; axis < 3; ++axis) {
                    for (int side = 0; side < 2; ++side) {
                        int added = 0;
                        face_segments(vals, axis, side, segs + n_segs, added);
                        n_segs += added;
                    }
                }

                // chain directed segments into loops and fan-triangulate
                int next_seg[12];
                for (int e = 0; e < 12; ++e) next_seg[e] = -1;
                for (int t = 0; t < n_segs; ++t) next_seg[segs[t].from_edge] = t;
                bool used[12] = {};
                for (int t0 = 0; t0 < n_segs; ++t0) {
                    if (used[t0]) continue;
                    int len = 0;
                    int t = t0;
                    do {
                        used[t] = true;
                        loop_edges[len++] = segs[t].from_edge;
                        t = next_seg[segs[t].to_edge];
                    } while (t >= 0 && t != t0 && len < 12);
                    if (len < 3) continue;  // degenerate, cannot happen for clean input
                    int vid[12];
                    for (int e = 0; e < len; ++e) {
                        int le = loop_edges[e];
                        int axis = kCell.edge_axis[le];
                        int c = kCell.edge_corner[le];
                        vid[e] = vertex_on_edge(i + (c & 1), j + ((c >> 1) & 1),
                                                k + ((c >> 2) & 1), axis);
                    }
                    for (int e = 1; e + 1 < len; ++e) {
                        mesh.triangles.push_back({vid[0], vid[e], vid[e + 1]});
                    }
                }
            }
        }
    }
    return mesh;
}

PointCloud sample_points(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
    if (mesh.triangles.empty()) throw InputError("sample_points: empty mesh");
    if (n < 1) throw InputError("sample_points: n must be >= 1");

    std::vector<double> cum(mesh.triangles.size());
    double total = 0.0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Eigen::Vector3d& a = mesh.vertices[tri[0]];
        const Eigen::Vector3d& b = mesh.vertices[tri[1]];
        const Eigen::Vector3d& c = mesh.vertices[tri[2]];
        total += 0.5 * (b - a).cross(c - a).norm();
        cum[t] = total;
    }
    if (!(total > 0.0)) throw InputError("sample_points: mesh has zero area");

    PointCloud cloud;
    cloud.points.reserve(n);
    detail::Rng rng(seed);
    for (std::size_t s = 0; s < n; ++s) {
        double target = rng.uniform() * total;
        std::size_t t = std::upper_bound(cum.begin(), cum.end(), target) - cum.begin();
        if (t >= cum.size()) t = cum.size() - 1;
        const auto& tri = mesh.triangles[t];
        const Eigen::Vector3d& a = mesh.vertices[tri[0]];
        const Eigen::Vector3d& b = mesh.vertices[tri[1]];
        const Eigen::Vector3d& c = mesh.vertices[tri[2]];
        double r1 = std::sqrt(rng.uniform());
        double r2 = rng.uniform();
        cloud.points.push_back((1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c);
    }
    return cloud;
}

}  // namespace fawn
