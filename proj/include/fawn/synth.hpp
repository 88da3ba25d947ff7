#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "fawn/evalkit.hpp"
#include "fawn/normals.hpp"
#include "fawn/surface.hpp"
#include "fawn/volume.hpp"

namespace fawn {

struct BoxSpec {
    Eigen::Vector3d center{0, 0, 0};
    Eigen::Vector3d size{1, 1, 1};
    double yaw_deg = 0.0;
};

struct SphereSpec {
    Eigen::Vector3d center{0, 0, 0};
    double radius = 0.0;
};

struct WavinessSpec {
    double amplitude = 0.0;   // meters
    double wavelength = 1.0;  // meters
};

struct TrajectorySpec {
    int count = 24;
    double orbit_radius = 0.0;   // 0: 0.25 * min(extent.x, extent.y)
    double orbit_height = 0.0;   // 0: 0.45 * extent.z
    double target_height = 0.0;  // 0: 0.30 * extent.z
    double fov_deg = 70.0;
    int width = 640;
    int height = 480;
};

/// Room interior spans [0, extent] with the floor base plane at z = 0;
/// everything outside the shell is solid. Wall tilts lean the wall tops
/// outward about their floor hinge (order -x, +x, -y, +y).
struct SceneSpec {
    Eigen::Vector3d room_extent{4.0, 3.2, 2.5};
    std::array<double, 4> wall_tilt_deg{0, 0, 0, 0};
    WavinessSpec floor_waviness;
    std::vector<BoxSpec> clutter;
    double noise_sigma = 0.0;
    std::vector<SphereSpec> holes;
    TrajectorySpec trajectory;
    double voxel_size = 0.04;
    double truncation = 0.12;
    double margin = 0.0;  // 0: truncation + 2h
    std::uint64_t seed = 1;

    void validate() const;
};

/// Analytic scene geometry: exact signed distances (positive in air) per
/// primitive, their pointwise minimum, and nearest-primitive queries.
class RoomGeometry {
public:
    enum Primitive : int {
        kFloor = 0,
        kCeiling = 1,
        kWallNegX = 2,
        kWallPosX = 3,
        kWallNegY = 4,
        kWallPosY = 5,
        kClutterBase = 6,
    };

    explicit RoomGeometry(const SceneSpec& spec);

    double air_distance(const Eigen::Vector3d& p) const;
    int nearest_primitive(const Eigen::Vector3d& p) const;
    /// inward unit normal of one of the four wall planes
    Eigen::Vector3d wall_normal(int wall) const { return walls_[wall].n; }
    double floor_height(double x, double y) const;

private:
    struct Plane {
        Eigen::Vector3d n;  // unit, pointing into the air
        double d;           // air side: n.p - d >= 0
    };
    struct Box {
        Eigen::Vector3d center, half;
        double cos_yaw, sin_yaw;
    };

    double primitive_distance(int id, const Eigen::Vector3d& p) const;
    int primitive_count() const { return kClutterBase + static_cast<int>(boxes_.size()); }

    Plane walls_[4];
    Plane ceiling_;
    WavinessSpec wav_;
    std::vector<Box> boxes_;
};

struct SceneBundle {
    TsdfVolume gt_tsdf;
    TriangleMesh gt_mesh;
    NormalField gt_normals;
    SemanticVolume semantics;
    TsdfVolume obs_tsdf;
    std::vector<PinholeCamera> cameras;
};

/// Grid implied by the scene spec: room extent plus margin on every side.
GridSpec scene_grid(const SceneSpec& spec);

/// Exact (clamped) signed-distance TSDF, mesh, normals, heuristic labels,
/// perturbed observation, and an orbit trajectory. Deterministic per seed.
SceneBundle generate_room(const SceneSpec& spec);

/// Seeded Gaussian noise on |f| < tau voxels, re-clamped; hole interiors
/// become unobserved (+tau, weight 0).
TsdfVolume perturb_tsdf(const TsdfVolume& gt, double noise_sigma,
                        std::span<const SphereSpec> holes, std::uint64_t seed);

struct LabelOptions {
    double band = 0.0;               // 0: min(tau, 3h)
    double floor_height_band = 0.0;  // 0: 3h + waviness amplitude
    double angle_tol_deg = 15.0;
};

/// Geometric stand-in for a learned semantic head: floor = near-vertical
/// normal at floor height, walls = near-horizontal normal on the shell,
/// rest of the band = other, off-band = unknown.
SemanticVolume label_semantics(const NormalField& gt_normals, const TsdfVolume& gt_tsdf,
                               const SceneSpec& scene, const LabelOptions& opts = {});

std::vector<PinholeCamera> orbit_trajectory(const SceneSpec& spec);

}  // namespace fawn
