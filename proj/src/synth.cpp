#include "fawn/synth.hpp"

#include <cmath>
#include <numbers>

#include "fawn/detail/parallel.hpp"
#include "fawn/detail/rng.hpp"

namespace fawn {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

void SceneSpec::validate() const {
    if (!(room_extent.minCoeff() > 0.0)) throw InputError("scene: room extents must be positive");
    if (!(voxel_size > 0.0)) throw InputError("scene: voxel_size must be positive");
    if (!(truncation >= voxel_size)) throw InputError("scene: truncation must be >= voxel_size");
    if (noise_sigma < 0.0) throw InputError("scene: noise_sigma must be >= 0");
    if (trajectory.count < 1) throw InputError("scene: trajectory count must be >= 1");
    if (trajectory.width < 1 || trajectory.height < 1) {
        throw InputError("scene: trajectory image size must be positive");
    }
    if (!(trajectory.fov_deg > 0.0) || !(trajectory.fov_deg < 180.0)) {
        throw InputError("scene: fov must be in (0, 180)");
    }
    for (const auto& b : clutter) {
        if (!(b.size.minCoeff() > 0.0)) throw InputError("scene: clutter sizes must be positive");
    }
    for (const auto& h : holes) {
        if (!(h.radius > 0.0)) throw InputError("scene: hole radii must be positive");
    }
    if (floor_waviness.amplitude != 0.0 && !(floor_waviness.wavelength > 0.0)) {
        throw InputError("scene: waviness wavelength must be positive");
    }
}

RoomGeometry::RoomGeometry(const SceneSpec& spec) : wav_(spec.floor_waviness) {
    const Eigen::Vector3d& e = spec.room_extent;
    auto tilted = [&](int wall, const Eigen::Vector3d& base_n,
                      const Eigen::Vector3d& hinge_point, const Eigen::Vector3d& hinge_axis) {
        double t = spec.wall_tilt_deg[wall] * kDegToRad;
        // rotate the inward normal about the floor hinge: the wall top leans
        // outward, n_z becomes sin(tilt)
        Eigen::Vector3d n = std::cos(t) * base_n + std::sin(t) * hinge_axis.cross(base_n);
        walls_[wall].n = n;
        walls_[wall].d = n.dot(hinge_point);
    };
    // hinge axes picked so that positive tilt raises n_z
    tilted(0, {1, 0, 0}, {0, 0, 0}, {0, -1, 0});
    tilted(1, {-1, 0, 0}, {e.x(), 0, 0}, {0, 1, 0});
    tilted(2, {0, 1, 0}, {0, 0, 0}, {1, 0, 0});
    tilted(3, {0, -1, 0}, {0, e.y(), 0}, {-1, 0, 0});
    ceiling_.n = {0, 0, -1};
    ceiling_.d = -e.z();

    boxes_.reserve(spec.clutter.size());
    for (const auto& b : spec.clutter) {
        double yaw = b.yaw_deg * kDegToRad;
        boxes_.push_back({b.center, 0.5 * b.size, std::cos(yaw), std::sin(yaw)});
    }
}

double RoomGeometry::floor_height(double x, double y) const {
    if (wav_.amplitude == 0.0) return 0.0;
    double w = 2.0 * std::numbers::pi / wav_.wavelength;
    return wav_.amplitude * std::sin(w * x) * std::sin(w * y);
}

double RoomGeometry::primitive_distance(int id, const Eigen::Vector3d& p) const {
    if (id == kFloor) {
        if (wav_.amplitude == 0.0) return p.z();
        double w = 2.0 * std::numbers::pi / wav_.wavelength;
        double sx = wav_.amplitude * w * std::cos(w * p.x()) * std::sin(w * p.y());
        double sy = wav_.amplitude * w * std::sin(w * p.x()) * std::cos(w * p.y());
        // first-order distance to the graph surface z = s(x, y)
        return (p.z() - floor_height(p.x(), p.y())) / std::sqrt(1.0 + sx * sx + sy * sy);
    }
    if (id == kCeiling) return ceiling_.n.dot(p) - ceiling_.d;
    if (id < kClutterBase) {
        const Plane& pl = walls_[id - kWallNegX];
        return pl.n.dot(p) - pl.d;
    }
    const Box& b = boxes_[id - kClutterBase];
    Eigen::Vector3d d = p - b.center;
    // rotate into the box frame (yaw about z), exact box signed distance,
    // positive outside the box (= in the air)
    Eigen::Vector3d local(b.cos_yaw * d.x() + b.sin_yaw * d.y(),
                          -b.sin_yaw * d.x() + b.cos_yaw * d.y(), d.z());
    Eigen::Vector3d q = local.cwiseAbs() - b.half;
    double outside = q.cwiseMax(0.0).norm();
    double inside = std::min(q.maxCoeff(), 0.0);
    return outside + inside;
}

double RoomGeometry::air_distance(const Eigen::Vector3d& p) const {
    double best = primitive_distance(0, p);
    for (int id = 1; id < primitive_count(); ++id) {
        best = std::min(best, primitive_distance(id, p));
    }
    return best;
}

int RoomGeometry::nearest_primitive(const Eigen::Vector3d& p) const {
    int best_id = 0;
    double best = std::abs(primitive_distance(0, p));
    for (int id = 1; id < primitive_count(); ++id) {
        double d = std::abs(primitive_distance(id, p));
        if (d < best) {
            best = d;
            best_id = id;
        }
    }
    return best_id;
}

GridSpec scene_grid(const SceneSpec& spec) {
    spec.validate();
    const double h = spec.voxel_size;
    const double margin = spec.margin > 0.0 ? spec.margin : spec.truncation + 2.0 * h;
    GridSpec g;
    g.voxel_size = h;
    g.truncation = spec.truncation;
    g.origin = Eigen::Vector3d::Constant(-margin);
    for (int a = 0; a < 3; ++a) {
        g.dims[a] = static_cast<int>(std::floor((spec.room_extent[a] + 2.0 * margin) / h)) + 1;
    }
    g.validate();
    return g;
}

TsdfVolume perturb_tsdf(const TsdfVolume& gt, double noise_sigma,
                        std::span<const SphereSpec> holes, std::uint64_t seed) {
    if (noise_sigma < 0.0) throw InputError("perturb_tsdf: noise_sigma must be >= 0");
    const GridSpec& s = gt.spec();
    const double tau = s.truncation;
    std::vector<double> values(gt.values().begin(), gt.values().end());
    std::vector<double> weights(s.voxel_count(), 1.0);

    if (noise_sigma > 0.0) {
        detail::Rng rng(seed);
        for (double& v : values) {
            if (std::abs(v) < tau) {
                v = std::clamp(v + noise_sigma * rng.normal(), -tau, tau);
            }
        }
    }
    for (const auto& hole : holes) {
        const double r2 = hole.radius * hole.radius;
        const std::size_t n = s.voxel_count();
        for (std::size_t idx = 0; idx < n; ++idx) {
            Eigen::Vector3i c = s.coords(idx);
            if ((s.voxel_center(c.x(), c.y(), c.z()) - hole.center).squaredNorm() <= r2) {
                values[idx] = tau;
                weights[idx] = 0.0;
            }
        }
    }
    return TsdfVolume(s, std::move(values), std::move(weights));
}

SemanticVolume label_semantics(const NormalField& gt_normals, const TsdfVolume& gt_tsdf,
                               const SceneSpec& scene, const LabelOptions& opts) {
    if (!(gt_normals.spec == gt_tsdf.spec())) {
        throw SpecMismatchError("label_semantics: normals vs tsdf");
    }
    const GridSpec& s = gt_tsdf.spec();
    const double h = s.voxel_size;
    const double band = opts.band > 0.0 ? opts.band : std::min(s.truncation, 3.0 * h);
    const double floor_band = opts.floor_height_band > 0.0
                                  ? opts.floor_height_band
                                  : 3.0 * h + scene.floor_waviness.amplitude;
    const double cos_tol = std::cos(opts.angle_tol_deg * kDegToRad);
    const double sin_tol = std::sin(opts.angle_tol_deg * kDegToRad);

    RoomGeometry geo(scene);
    std::vector<std::uint8_t> labels(s.voxel_count(),
                                     static_cast<std::uint8_t>(SemLabel::kUnknown));
    const std::size_t n = s.voxel_count();
    detail::parallel_for(0, static_cast<std::int64_t>(n), [&](std::int64_t idx) {
        if (std::abs(gt_tsdf.values()[idx]) >= band) return;
        Eigen::Vector3i c = s.coords(idx);
        std::uint8_t label = static_cast<std::uint8_t>(SemLabel::kOther);
        if (gt_normals.valid[idx]) {
            const Eigen::Vector3d& nrm = gt_normals.vectors[idx];
            Eigen::Vector3d p = s.voxel_center(c.x(), c.y(), c.z());
            if (nrm.z() >= cos_tol && std::abs(p.z()) <= floor_band) {
                label = static_cast<std::uint8_t>(SemLabel::kFloor);
            } else if (std::abs(nrm.z()) < sin_tol) {
                int prim = geo.nearest_primitive(p);
                if (prim >= RoomGeometry::kWallNegX && prim <= RoomGeometry::kWallPosY) {
                    label = static_cast<std::uint8_t>(SemLabel::kWalls);
                }
            }
        }
        labels[idx] = label;
    });
    return SemanticVolume(s, std::move(labels));
}

std::vector<PinholeCamera> orbit_trajectory(const SceneSpec& spec) {
    const TrajectorySpec& t = spec.trajectory;
    const Eigen::Vector3d& e = spec.room_extent;
    const double radius = t.orbit_radius > 0.0 ? t.orbit_radius : 0.25 * std::min(e.x(), e.y());
    const double eye_z = t.orbit_height > 0.0 ? t.orbit_height : 0.45 * e.z();
    const double target_z = t.target_height > 0.0 ? t.target_height : 0.30 * e.z();
    const double cx = 0.5 * e.x(), cy = 0.5 * e.y();

    std::vector<PinholeCamera> cams;
    cams.reserve(t.count);
    for (int i = 0; i < t.count; ++i) {
        double a = 2.0 * std::numbers::pi * i / t.count;
        Eigen::Vector3d eye(cx + radius * std::cos(a), cy + radius * std::sin(a), eye_z);
        // look across the room center at the opposite side
        Eigen::Vector3d target(cx - radius * std::cos(a), cy - radius * std::sin(a), target_z);

        Eigen::Vector3d fwd = (target - eye).normalized();
        Eigen::Vector3d right = Eigen::Vector3d(0, 0, -1).cross(fwd);
        if (right.norm() < 1e-9) right = Eigen::Vector3d(1, 0, 0);
        right.normalize();
        Eigen::Vector3d down = fwd.cross(right);

        PinholeCamera cam;
        cam.width = t.width;
        cam.height = t.height;
        cam.fx = cam.fy = t.width / (2.0 * std::tan(0.5 * t.fov_deg * kDegToRad));
        cam.cx = 0.5 * t.width;
        cam.cy = 0.5 * t.height;
        cam.pose = Eigen::Matrix4d::Identity();
        cam.pose.block<3, 1>(0, 0) = right;
        cam.pose.block<3, 1>(0, 1) = down;
        cam.pose.block<3, 1>(0, 2) = fwd;
        cam.pose.block<3, 1>(0, 3) = eye;
        cam.validate();
        cams.push_back(cam);
    }
    return cams;
}

SceneBundle generate_room(const SceneSpec& spec) {
    spec.validate();
    GridSpec grid = scene_grid(spec);
    RoomGeometry geo(spec);

    const std::size_t n = grid.voxel_count();
    std::vector<double> values(n);
    const double tau = grid.truncation;
    const int nx = grid.dims.x(), ny = grid.dims.y(), nz = grid.dims.z();
    detail::parallel_for(0, nz, [&](std::int64_t k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                Eigen::Vector3d p = grid.voxel_center(i, j, static_cast<int>(k));
                values[grid.index(i, j, static_cast<int>(k))] =
                    std::clamp(geo.air_distance(p), -tau, tau);
            }
        }
    });

    SceneBundle bundle;
    bundle.gt_tsdf = TsdfVolume(grid, std::move(values));
    bundle.gt_mesh = marching_cubes(bundle.gt_tsdf, 0.0);
    bundle.gt_normals = normalize_field(gradient_central(bundle.gt_tsdf), 1e-8);
    bundle.semantics = label_semantics(bundle.gt_normals, bundle.gt_tsdf, spec);
    bundle.obs_tsdf = perturb_tsdf(bundle.gt_tsdf, spec.noise_sigma, spec.holes, spec.seed);
    bundle.cameras = orbit_trajectory(spec);
    return bundle;
}

}  // namespace fawn
