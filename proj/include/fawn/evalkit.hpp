#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "fawn/surface.hpp"
#include "fawn/volume.hpp"

namespace fawn {

/// Pinhole intrinsics + camera-to-world pose. Right-handed, the camera
/// looks down +z in its own frame, image v grows with +y.
struct PinholeCamera {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 640, height = 480;
    Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();

    /// fx,fy > 0, sane extent, rotation block orthonormal within 1e-6.
    void validate() const;
    Eigen::Matrix4d world_to_camera() const;
};

/// Row-major per-pixel depth in meters; 0 encodes invalid.
struct DepthMap {
    int width = 0, height = 0;
    std::vector<float> depth;

    float at(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
    float& at(int x, int y) { return depth[static_cast<std::size_t>(y) * width + x]; }
    std::size_t valid_count() const;
};

struct RenderOptions {
    double znear = 1e-6;
    double max_depth = 0.0;  // 0 = unlimited; beyond it pixels count invalid
};

/// Scene-level scores; distances in cm, rates in percent.
struct MetricsReport {
    double acc_cm = 0, comp_cm = 0;
    double prec_pct = 0, recall_pct = 0, fscore_pct = 0;
    double coverage_pct = 0;
};

/// Software z-buffer rasterization, nearest hit per pixel, perspective
/// correct, both triangle sides visible.
DepthMap render_depth(const TriangleMesh& mesh, const PinholeCamera& cam,
                      const RenderOptions& opts = {});

/// Invalidates pred pixels wherever gt is invalid.
DepthMap mask_depth(const DepthMap& pred, const DepthMap& gt);

/// Weighted-average TSDF integration of depth maps; unobserved voxels hold
/// +tau with weight 0.
TsdfVolume fuse_depths(std::span<const DepthMap> depths, std::span<const PinholeCamera> cams,
                       const GridSpec& spec);

/// Mean percentage of valid pixels across frames.
double coverage(const TriangleMesh& mesh, std::span<const PinholeCamera> cams,
                const RenderOptions& opts = {});

struct PointMetrics {
    double acc_m = 0, comp_m = 0;
    double prec_pct = 0, recall_pct = 0, fscore_pct = 0;
};

/// Exact nearest-neighbor cloud comparison (acc/comp/prec/recall/F-score at
/// `threshold` meters); spatially indexed but equal to brute force.
PointMetrics point_metrics(const PointCloud& pred, const PointCloud& gt, double threshold = 0.05);

struct EvalOptions {
    std::size_t n_sample = 200000;
    std::uint64_t seed = 0;
    double threshold = 0.05;
    RenderOptions render;
};

/// Full protocol: render gt + pred depths, mask pred by gt validity, fuse
/// the masked depths, re-mesh, sample both meshes (pred with `seed`, gt
/// with `seed+1`), compare clouds; coverage comes from the unmasked pred
/// mesh.
MetricsReport evaluate_protocol(const TriangleMesh& pred_mesh, const TriangleMesh& gt_mesh,
                                std::span<const PinholeCamera> cams, const GridSpec& spec,
                                const EvalOptions& opts = {});

// --- interchange ---

void save_depth(const DepthMap& d, const std::filesystem::path& path);  // FDEP
DepthMap load_depth(const std::filesystem::path& path);

void save_cameras(std::span<const PinholeCamera> cams, const std::filesystem::path& path);
std::vector<PinholeCamera> load_cameras(const std::filesystem::path& path);

}  // namespace fawn
