#include "fawn/evalkit.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "fawn/detail/kdtree.hpp"
#include "fawn/detail/parallel.hpp"
#include "fawn/detail/sum.hpp"

namespace fawn {

void PinholeCamera::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw InputError("camera: fx, fy must be positive");
    if (width < 1 || height < 1) throw InputError("camera: bad image size");
    if (!pose.allFinite()) throw InputError("camera: pose must be finite");
    Eigen::Matrix3d r = pose.topLeftCorner<3, 3>();
    if (((r.transpose() * r) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6) {
        throw InputError("camera: rotation block is not orthonormal");
    }
    if ((pose.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-9) {
        throw InputError("camera: bottom pose row must be (0,0,0,1)");
    }
}

Eigen::Matrix4d PinholeCamera::world_to_camera() const {
    Eigen::Matrix3d r = pose.topLeftCorner<3, 3>();
    Eigen::Vector3d t = pose.topRightCorner<3, 1>();
    Eigen::Matrix4d inv = Eigen::Matrix4d::Identity();
    inv.topLeftCorner<3, 3>() = r.transpose();
    inv.topRightCorner<3, 1>() = -r.transpose() * t;
    return inv;
}

std::size_t DepthMap::valid_count() const {
    std::size_t n = 0;
    for (float d : depth) n += d > 0.0f;
    return n;
}

namespace {

bool pixel_valid(float d, const RenderOptions& opts) {
    return d > 0.0f && (opts.max_depth <= 0.0 || d <= opts.max_depth);
}

// clip a camera-space triangle against z >= znear; out holds up to 4 points
int clip_near(const Eigen::Vector3d in[3], double znear, Eigen::Vector3d out[4]) {
    int n = 0;
    for (int e = 0; e < 3; ++e) {
        const Eigen::Vector3d& a = in[e];
        const Eigen::Vector3d& b = in[(e + 1) % 3];
        bool ain = a.z() >= znear, bin = b.z() >= znear;
        if (ain) out[n++] = a;
        if (ain != bin) {
            double t = (znear - a.z()) / (b.z() - a.z());
            out[n++] = a + t * (b - a);
        }
    }
    return n;
}

void raster_triangle(DepthMap& dm, const PinholeCamera& cam, const Eigen::Vector3d tri[3]) {
    // screen coords with pixel centers at (x+0.5, y+0.5); invz is linear
    // in screen space, so 1/interp(1/z) is the perspective-correct depth
    double u[3], v[3], invz[3];
    for (int e = 0; e < 3; ++e) {
        double z = tri[e].z();
        u[e] = cam.fx * tri[e].x() / z + cam.cx;
        v[e] = cam.fy * tri[e].y() / z + cam.cy;
        invz[e] = 1.0 / z;
    }
    double area = (u[1] - u[0]) * (v[2] - v[0]) - (u[2] - u[0]) * (v[1] - v[0]);
    if (std::abs(area) < 1e-14) return;

    double min_u = std::min({u[0], u[1], u[2]}), max_u = std::max({u[0], u[1], u[2]});
    double min_v = std::min({v[0], v[1], v[2]}), max_v = std::max({v[0], v[1], v[2]});
    int x0 = std::max(0, static_cast<int>(std::ceil(min_u - 0.5)));
    int x1 = std::min(dm.width - 1, static_cast<int>(std::floor(max_u - 0.5)));
    int y0 = std::max(0, static_cast<int>(std::ceil(min_v - 0.5)));
    int y1 = std::min(dm.height - 1, static_cast<int>(std::floor(max_v - 0.5)));
    if (x0 > x1 || y0 > y1) return;

    double inv_area = 1.0 / area;
    for (int y = y0; y <= y1; ++y) {
        double py = y + 0.5;
        for (int x = x0; x <= x1; ++x) {
            double px = x + 0.5;
            double w0 = (u[1] - px) * (v[2] - py) - (u[2] - px) * (v[1] - py);
            double w1 = (u[2] - px) * (v[0] - py) - (u[0] - px) * (v[2] - py);
            double w2 = (u[0] - px) * (v[1] - py) - (u[1] - px) * (v[0] - py);
            bool inside = area > 0 ? (w0 >= 0 && w1 >= 0 && w2 >= 0)
                                   : (w0 <= 0 && w1 <= 0 && w2 <= 0);
            if (!inside) continue;
            double iz = (w0 * invz[0] + w1 * invz[1] + w2 * invz[2]) * inv_area;
            if (!(iz > 0.0)) continue;
            float z = static_cast<float>(1.0 / iz);
            float& slot = dm.at(x, y);
            if (slot <= 0.0f || z < slot) slot = z;
        }
    }
}

}  // namespace

DepthMap render_depth(const TriangleMesh& mesh, const PinholeCamera& cam,
                      const RenderOptions& opts) {
    cam.validate();
    DepthMap dm;
    dm.width = cam.width;
    dm.height = cam.height;
    dm.depth.assign(static_cast<std::size_t>(cam.width) * cam.height, 0.0f);

    Eigen::Matrix4d w2c = cam.world_to_camera();
    Eigen::Matrix3d r = w2c.topLeftCorner<3, 3>();
    Eigen::Vector3d t = w2c.topRightCorner<3, 1>();

    for (const auto& tri : mesh.triangles) {
        Eigen::Vector3d pc[3];
        for (int e = 0; e < 3; ++e) pc[e] = r * mesh.vertices[tri[e]] + t;
        if (pc[0].z() < opts.znear && pc[1].z() < opts.znear && pc[2].z() < opts.znear) continue;
        Eigen::Vector3d poly[4];
        int n = clip_near(pc, opts.znear, poly);
        for (int e = 1; e + 1 < n; ++e) {
            Eigen::Vector3d sub[3] = {poly[0], poly[e], poly[e + 1]};
            raster_triangle(dm, cam, sub);
        }
    }
    return dm;
}

DepthMap mask_depth(const DepthMap& pred, const DepthMap& gt) {
    if (pred.width != gt.width || pred.height != gt.height) {
        throw InputError("mask_depth: resolution mismatch");
    }
    DepthMap out = pred;
    for (std::size_t i = 0; i < out.depth.size(); ++i) {
        if (gt.depth[i] <= 0.0f) out.depth[i] = 0.0f;
    }
    return out;
}

TsdfVolume fuse_depths(std::span<const DepthMap> depths, std::span<const PinholeCamera> cams,
                       const GridSpec& spec) {
    if (depths.size() != cams.size()) throw InputError("fuse_depths: list length mismatch");
    if (depths.empty()) throw InputError("fuse_depths: need at least one frame");
    spec.validate();
    for (std::size_t f = 0; f < cams.size(); ++f) {
        cams[f].validate();
        if (depths[f].width != cams[f].width || depths[f].height != cams[f].height) {
            throw InputError("fuse_depths: depth/camera resolution mismatch");
        }
    }

    const std::size_t n = spec.voxel_count();
    std::vector<double> values(n, spec.truncation);
    std::vector<double> weights(n, 0.0);

    std::vector<Eigen::Matrix4d> w2c(cams.size());
    for (std::size_t f = 0; f < cams.size(); ++f) w2c[f] = cams[f].world_to_camera();

    const double tau = spec.truncation;
    const int nx = spec.dims.x(), ny = spec.dims.y(), nz = spec.dims.z();
    detail::parallel_for(0, nz, [&](std::int64_t k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                Eigen::Vector4d pw;
                pw << spec.voxel_center(i, j, static_cast<int>(k)), 1.0;
                double mean = 0.0;
                double count = 0.0;
                for (std::size_t f = 0; f < cams.size(); ++f) {
                    Eigen::Vector4d pc = w2c[f] * pw;
                    double z = pc.z();
                    if (!(z > 0.0)) continue;
                    double u = cams[f].fx * pc.x() / z + cams[f].cx;
                    double v = cams[f].fy * pc.y() / z + cams[f].cy;
                    int px = static_cast<int>(std::floor(u));
                    int py = static_cast<int>(std::floor(v));
                    if (px < 0 || py < 0 || px >= cams[f].width || py >= cams[f].height) continue;
                    float d = depths[f].at(px, py);
                    if (d <= 0.0f) continue;
                    double est = static_cast<double>(d) - z;
                    if (!(est > -tau)) continue;
                    est = std::min(est, tau);
                    count += 1.0;
                    mean += (est - mean) / count;
                }
                if (count > 0.0) {
                    std::size_t idx = spec.index(i, j, static_cast<int>(k));
                    values[idx] = mean;
                    weights[idx] = count;
                }
            }
        }
    });
    return TsdfVolume(spec, std::move(values), std::move(weights));
}

double coverage(const TriangleMesh& mesh, std::span<const PinholeCamera> cams,
                const RenderOptions& opts) {
    if (cams.empty()) throw InputError("coverage: need at least one camera");
    std::vector<double> per_frame(cams.size());
    detail::parallel_for(0, static_cast<std::int64_t>(cams.size()), [&](std::int64_t f) {
        DepthMap d = render_depth(mesh, cams[f], opts);
        std::size_t valid = 0;
        for (float v : d.depth) valid += pixel_valid(v, opts);
        per_frame[f] = 100.0 * static_cast<double>(valid) / static_cast<double>(d.depth.size());
    });
    detail::KahanSum sum;
    for (double c : per_frame) sum.add(c);
    return sum.value() / static_cast<double>(cams.size());
}

PointMetrics point_metrics(const PointCloud& pred, const PointCloud& gt, double threshold) {
    if (pred.points.empty() || gt.points.empty()) {
        throw InputError("point_metrics: clouds must be non-empty");
    }
    detail::KdTree pred_tree(pred.points);
    detail::KdTree gt_tree(gt.points);

    std::vector<double> d_pred(pred.points.size());
    detail::parallel_for(0, static_cast<std::int64_t>(pred.points.size()), [&](std::int64_t i) {
        d_pred[i] = std::sqrt(gt_tree.nearest_sq(pred.points[i]));
    });
    std::vector<double> d_gt(gt.points.size());
    detail::parallel_for(0, static_cast<std::int64_t>(gt.points.size()), [&](std::int64_t i) {
        d_gt[i] = std::sqrt(pred_tree.nearest_sq(gt.points[i]));
    });

    detail::KahanSum acc_sum, comp_sum;
    std::size_t n_prec = 0, n_recall = 0;
    for (double d : d_pred) {
        acc_sum.add(d);
        n_prec += d < threshold;
    }
    for (double d : d_gt) {
        comp_sum.add(d);
        n_recall += d < threshold;
    }

    PointMetrics m;
    m.acc_m = acc_sum.value() / static_cast<double>(pred.points.size());
    m.comp_m = comp_sum.value() / static_cast<double>(gt.points.size());
    m.prec_pct = 100.0 * static_cast<double>(n_prec) / static_cast<double>(pred.points.size());
    m.recall_pct = 100.0 * static_cast<double>(n_recall) / static_cast<double>(gt.points.size());
    m.fscore_pct = (m.prec_pct + m.recall_pct) > 0.0
                       ? 2.0 * m.prec_pct * m.recall_pct / (m.prec_pct + m.recall_pct)
                       : 0.0;
    return m;
}

MetricsReport evaluate_protocol(const TriangleMesh& pred_mesh, const TriangleMesh& gt_mesh,
                                std::span<const PinholeCamera> cams, const GridSpec& spec,
                                const EvalOptions& opts) {
    if (gt_mesh.empty()) throw InputError("evaluate_protocol: gt mesh is empty");
    if (cams.empty()) throw InputError("evaluate_protocol: need at least one camera");

    std::vector<DepthMap> gt_depths(cams.size());
    std::vector<DepthMap> pred_depths(cams.size());
    detail::parallel_for(0, static_cast<std::int64_t>(cams.size()), [&](std::int64_t f) {
        gt_depths[f] = render_depth(gt_mesh, cams[f], opts.render);
        pred_depths[f] = render_depth(pred_mesh, cams[f], opts.render);
    });

    // coverage of the raw (unmasked) prediction, straight off its renders
    detail::KahanSum cov_sum;
    for (const auto& d : pred_depths) {
        std::size_t valid = 0;
        for (float v : d.depth) valid += pixel_valid(v, opts.render);
        cov_sum.add(100.0 * static_cast<double>(valid) / static_cast<double>(d.depth.size()));
    }
    double cov = cov_sum.value() / static_cast<double>(cams.size());

    std::vector<DepthMap> masked(cams.size());
    for (std::size_t f = 0; f < cams.size(); ++f) {
        masked[f] = mask_depth(pred_depths[f], gt_depths[f]);
    }

    TsdfVolume fused = fuse_depths(masked, cams, spec);
    TriangleMesh fused_mesh = marching_cubes(fused, 0.0);
    if (fused_mesh.empty()) {
        throw InputError("evaluate_protocol: fused prediction produced an empty mesh");
    }

    PointCloud pred_cloud = sample_points(fused_mesh, opts.n_sample, opts.seed);
    PointCloud gt_cloud = sample_points(gt_mesh, opts.n_sample, opts.seed + 1);
    PointMetrics pm = point_metrics(pred_cloud, gt_cloud, opts.threshold);

    MetricsReport r;
    r.acc_cm = 100.0 * pm.acc_m;
    r.comp_cm = 100.0 * pm.comp_m;
    r.prec_pct = pm.prec_pct;
    r.recall_pct = pm.recall_pct;
    r.fscore_pct = pm.fscore_pct;
    r.coverage_pct = cov;
    return r;
}

void save_depth(const DepthMap& d, const std::filesystem::path& path) {
    std::string buf;
    buf.reserve(12 + 4 * d.depth.size());
    buf.append("FDEP", 4);
    auto put_u32 = [&](std::uint32_t v) {
        for (int b = 0; b < 4; ++b) buf.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
    };
    put_u32(static_cast<std::uint32_t>(d.width));
    put_u32(static_cast<std::uint32_t>(d.height));
    for (float v : d.depth) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(bits);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

DepthMap load_depth(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "FDEP", 4) != 0) {
        throw IoError("malformed header in " + path.string());
    }
    auto get_u32 = [&]() {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        if (in.gcount() != 4) throw IoError("truncated header in " + path.string());
        return static_cast<std::uint32_t>(b[0]) | (b[1] << 8) | (b[2] << 16) |
               (static_cast<std::uint32_t>(b[3]) << 24);
    };
    DepthMap d;
    d.width = static_cast<int>(get_u32());
    d.height = static_cast<int>(get_u32());
    if (d.width < 1 || d.height < 1) throw IoError("malformed header in " + path.string());
    std::size_t n = static_cast<std::size_t>(d.width) * d.height;
    d.depth.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits = get_u32();
        std::memcpy(&d.depth[i], &bits, 4);
    }
    return d;
}

}  // namespace fawn
