#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "fawn/volume.hpp"

namespace fawn {

/// Indexed triangle soup in world meters. Vertices produced by
/// marching_cubes are welded by grid-edge identity.
struct TriangleMesh {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<int, 3>> triangles;

    bool empty() const { return triangles.empty(); }
};

struct PointCloud {
    std::vector<Eigen::Vector3d> points;
};

/// Zero-isosurface (after subtracting `iso`) as a triangle mesh. Cell faces
/// with ambiguous sign patterns are resolved with the asymptotic decider on
/// the bilinear saddle value, so neighboring cells always agree and closed
/// surfaces come out watertight. Exact-zero samples are nudged by
/// +1e-12*tau before case analysis. Triangles wind with their normals
/// pointing toward positive values.
TriangleMesh marching_cubes(const TsdfVolume& vol, double iso = 0.0);

/// Area-weighted uniform surface samples, deterministic per seed.
PointCloud sample_points(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

/// PLY export/import: vertex x,y,z as float32, faces as uchar count +
/// int32 indices; binary little-endian by default.
void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path, bool ascii = false);
TriangleMesh load_mesh(const std::filesystem::path& path);

}  // namespace fawn
