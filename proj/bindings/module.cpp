#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fawn/detail/parallel.hpp"
#include "fawn/json_io.hpp"
#include "fawn/refine.hpp"
#include "fawn/synth.hpp"
#include "fawn/version.hpp"

namespace py = pybind11;
using namespace fawn;

namespace {

using FArray = py::array_t<double, py::array::f_style | py::array::forcecast>;

std::vector<double> grid_values_from_array(const GridSpec& spec, const FArray& arr) {
    if (arr.ndim() != 3 || arr.shape(0) != spec.dims.x() || arr.shape(1) != spec.dims.y() ||
        arr.shape(2) != spec.dims.z()) {
        throw InputError("array shape must match grid dims (nx, ny, nz)");
    }
    const double* p = arr.data();
    return std::vector<double>(p, p + spec.voxel_count());
}

py::array_t<double> grid_values_to_array(const GridSpec& spec, std::span<const double> values) {
    // x-fastest storage maps onto a Fortran-ordered (nx, ny, nz) array
    py::array_t<double> arr({spec.dims.x(), spec.dims.y(), spec.dims.z()},
                            {sizeof(double), sizeof(double) * spec.dims.x(),
                             sizeof(double) * spec.dims.x() * spec.dims.y()});
    std::copy(values.begin(), values.end(), arr.mutable_data());
    return arr;
}

py::array_t<float> depth_to_array(const DepthMap& d) {
    py::array_t<float> arr({d.height, d.width});
    std::copy(d.depth.begin(), d.depth.end(), arr.mutable_data());
    return arr;
}

DepthMap depth_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw InputError("depth map must be a (height, width) array");
    DepthMap d;
    d.height = static_cast<int>(a.shape(0));
    d.width = static_cast<int>(a.shape(1));
    d.depth.assign(a.data(), a.data() + a.size());
    return d;
}

py::array_t<double> points_to_array(const std::vector<Eigen::Vector3d>& pts) {
    py::array_t<double> arr({static_cast<py::ssize_t>(pts.size()), py::ssize_t(3)});
    auto r = arr.mutable_unchecked<2>();
    for (py::ssize_t i = 0; i < static_cast<py::ssize_t>(pts.size()); ++i) {
        for (int c = 0; c < 3; ++c) r(i, c) = pts[i][c];
    }
    return arr;
}

py::array_t<int> triangles_to_array(const std::vector<std::array<int, 3>>& tris) {
    py::array_t<int> arr({static_cast<py::ssize_t>(tris.size()), py::ssize_t(3)});
    auto r = arr.mutable_unchecked<2>();
    for (py::ssize_t i = 0; i < static_cast<py::ssize_t>(tris.size()); ++i) {
        for (int c = 0; c < 3; ++c) r(i, c) = tris[i][c];
    }
    return arr;
}

TriangleMesh mesh_from_arrays(const py::array_t<double, py::array::c_style | py::array::forcecast>& v,
                              const py::array_t<int, py::array::c_style | py::array::forcecast>& t) {
    if (v.ndim() != 2 || v.shape(1) != 3) throw InputError("vertices must be (n, 3)");
    if (t.ndim() != 2 || t.shape(1) != 3) throw InputError("triangles must be (m, 3)");
    TriangleMesh mesh;
    auto rv = v.unchecked<2>();
    for (py::ssize_t i = 0; i < v.shape(0); ++i) {
        mesh.vertices.emplace_back(rv(i, 0), rv(i, 1), rv(i, 2));
    }
    auto rt = t.unchecked<2>();
    for (py::ssize_t i = 0; i < t.shape(0); ++i) {
        mesh.triangles.push_back({rt(i, 0), rt(i, 1), rt(i, 2)});
        for (int c : mesh.triangles.back()) {
            if (c < 0 || static_cast<std::size_t>(c) >= mesh.vertices.size()) {
                throw InputError("triangle index out of range");
            }
        }
    }
    return mesh;
}

py::dict breakdown_to_dict(const LossBreakdown& b) {
    py::dict counts;
    counts["floor"] = b.counts.floor;
    counts["walls"] = b.counts.walls;
    counts["normal"] = b.counts.normal;
    counts["eikonal"] = b.counts.eikonal;
    counts["data"] = b.counts.data;
    py::dict d;
    d["floor"] = b.floor;
    d["walls"] = b.walls;
    d["fawn"] = b.fawn;
    d["norm_cosine"] = b.norm_cosine;
    d["norm_euclid"] = b.norm_euclid;
    d["eikonal"] = b.eikonal;
    d["data"] = b.data;
    d["total"] = b.total;
    d["counts"] = counts;
    return d;
}

py::dict metrics_to_dict(const MetricsReport& m) {
    py::dict d;
    d["acc_cm"] = m.acc_cm;
    d["comp_cm"] = m.comp_cm;
    d["prec_pct"] = m.prec_pct;
    d["recall_pct"] = m.recall_pct;
    d["fscore_pct"] = m.fscore_pct;
    d["coverage_pct"] = m.coverage_pct;
    return d;
}

NormalField normal_field_from_arrays(const GridSpec& spec, const FArray& vx, const FArray& vy,
                                     const FArray& vz) {
    NormalField f;
    f.spec = spec;
    std::vector<double> x = grid_values_from_array(spec, vx);
    std::vector<double> y = grid_values_from_array(spec, vy);
    std::vector<double> z = grid_values_from_array(spec, vz);
    f.vectors.resize(spec.voxel_count());
    f.valid.assign(spec.voxel_count(), 1);
    for (std::size_t i = 0; i < f.vectors.size(); ++i) f.vectors[i] = {x[i], y[i], z[i]};
    return f;
}

}  // namespace

PYBIND11_MODULE(_fawn, m) {
    m.doc() = "TSDF refinement with floor-and-walls normal regularization";
    m.attr("__version__") = kVersion;

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_IOError);

    py::class_<GridSpec>(m, "GridSpec")
        .def(py::init([](std::array<int, 3> dims, Eigen::Vector3d origin, double voxel_size,
                         double truncation) {
                 GridSpec s;
                 s.dims = {dims[0], dims[1], dims[2]};
                 s.origin = origin;
                 s.voxel_size = voxel_size;
                 s.truncation = truncation;
                 s.validate();
                 return s;
             }),
             py::arg("dims"), py::arg("origin"), py::arg("voxel_size"), py::arg("truncation"))
        .def_property_readonly(
            "dims", [](const GridSpec& s) { return std::array{s.dims.x(), s.dims.y(), s.dims.z()}; })
        .def_property_readonly("origin", [](const GridSpec& s) { return s.origin; })
        .def_readonly("voxel_size", &GridSpec::voxel_size)
        .def_readonly("truncation", &GridSpec::truncation)
        .def("voxel_count", &GridSpec::voxel_count)
        .def("__eq__", [](const GridSpec& a, const GridSpec& b) { return a == b; });

    py::class_<TsdfVolume>(m, "TsdfVolume")
        .def(py::init([](const GridSpec& spec, const FArray& values) {
                 return TsdfVolume(spec, grid_values_from_array(spec, values));
             }),
             py::arg("spec"), py::arg("values"))
        .def(py::init([](const GridSpec& spec, const FArray& values, const FArray& weights) {
                 return TsdfVolume(spec, grid_values_from_array(spec, values),
                                   grid_values_from_array(spec, weights));
             }),
             py::arg("spec"), py::arg("values"), py::arg("weights"))
        .def_property_readonly("spec", &TsdfVolume::spec)
        .def("values", [](const TsdfVolume& v) { return grid_values_to_array(v.spec(), v.values()); })
        .def("has_weights", &TsdfVolume::has_weights)
        .def("weights", [](const TsdfVolume& v) {
            if (!v.has_weights()) return py::object(py::none());
            return py::object(grid_values_to_array(v.spec(), v.weights()));
        });

    py::class_<SemanticVolume>(m, "SemanticVolume")
        .def(py::init([](const GridSpec& spec,
                         const py::array_t<std::uint8_t, py::array::f_style | py::array::forcecast>&
                             labels) {
                 if (labels.ndim() != 3 || labels.shape(0) != spec.dims.x() ||
                     labels.shape(1) != spec.dims.y() || labels.shape(2) != spec.dims.z()) {
                     throw InputError("label array shape must match grid dims");
                 }
                 std::vector<std::uint8_t> l(labels.data(), labels.data() + spec.voxel_count());
                 return SemanticVolume(spec, std::move(l));
             }),
             py::arg("spec"), py::arg("labels"))
        .def_property_readonly("spec", &SemanticVolume::spec)
        .def("labels", [](const SemanticVolume& v) {
            py::array_t<std::uint8_t> arr(
                {v.spec().dims.x(), v.spec().dims.y(), v.spec().dims.z()},
                {py::ssize_t(1), py::ssize_t(v.spec().dims.x()),
                 py::ssize_t(v.spec().dims.x()) * v.spec().dims.y()});
            std::copy(v.labels().begin(), v.labels().end(), arr.mutable_data());
            return arr;
        });

    py::class_<TriangleMesh>(m, "TriangleMesh")
        .def(py::init(&mesh_from_arrays), py::arg("vertices"), py::arg("triangles"))
        .def_property_readonly("vertices",
                               [](const TriangleMesh& m_) { return points_to_array(m_.vertices); })
        .def_property_readonly(
            "triangles", [](const TriangleMesh& m_) { return triangles_to_array(m_.triangles); })
        .def("empty", &TriangleMesh::empty);

    py::class_<PinholeCamera>(m, "PinholeCamera")
        .def(py::init([](double fx, double fy, double cx, double cy, int width, int height,
                         const Eigen::Matrix4d& pose) {
                 PinholeCamera c{fx, fy, cx, cy, width, height, pose};
                 c.validate();
                 return c;
             }),
             py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"), py::arg("width"),
             py::arg("height"), py::arg("pose"))
        .def_readonly("fx", &PinholeCamera::fx)
        .def_readonly("fy", &PinholeCamera::fy)
        .def_readonly("cx", &PinholeCamera::cx)
        .def_readonly("cy", &PinholeCamera::cy)
        .def_readonly("width", &PinholeCamera::width)
        .def_readonly("height", &PinholeCamera::height)
        .def_readonly("pose", &PinholeCamera::pose);

    py::class_<SceneBundle>(m, "SceneBundle")
        .def_readonly("gt_tsdf", &SceneBundle::gt_tsdf)
        .def_readonly("gt_mesh", &SceneBundle::gt_mesh)
        .def_readonly("semantics", &SceneBundle::semantics)
        .def_readonly("obs_tsdf", &SceneBundle::obs_tsdf)
        .def_readonly("cameras", &SceneBundle::cameras)
        .def("gt_normals", [](const SceneBundle& b) {
            const GridSpec& s = b.gt_normals.spec;
            std::vector<double> x(s.voxel_count()), y(s.voxel_count()), z(s.voxel_count());
            for (std::size_t i = 0; i < x.size(); ++i) {
                x[i] = b.gt_normals.vectors[i].x();
                y[i] = b.gt_normals.vectors[i].y();
                z[i] = b.gt_normals.vectors[i].z();
            }
            py::dict d;
            d["x"] = grid_values_to_array(s, x);
            d["y"] = grid_values_to_array(s, y);
            d["z"] = grid_values_to_array(s, z);
            py::array_t<std::uint8_t> varr({s.dims.x(), s.dims.y(), s.dims.z()},
                                           {py::ssize_t(1), py::ssize_t(s.dims.x()),
                                            py::ssize_t(s.dims.x()) * s.dims.y()});
            std::copy(b.gt_normals.valid.begin(), b.gt_normals.valid.end(), varr.mutable_data());
            d["valid"] = varr;
            return d;
        });

    // volume ops
    m.def("world_to_voxel", &world_to_voxel, py::arg("spec"), py::arg("p"));
    m.def("voxel_to_world", &voxel_to_world, py::arg("spec"), py::arg("c"));
    m.def(
        "sample_trilinear",
        [](const TsdfVolume& vol, const Eigen::Vector3d& p) -> py::object {
            auto v = sample_trilinear(vol, p);
            if (!v) return py::none();
            return py::float_(*v);
        },
        py::arg("volume"), py::arg("p"));
    m.def(
        "narrow_band",
        [](const TsdfVolume& vol, double band) {
            auto idx = narrow_band(vol, band);
            py::array_t<std::size_t> arr(static_cast<py::ssize_t>(idx.size()));
            std::copy(idx.begin(), idx.end(), arr.mutable_data());
            return arr;
        },
        py::arg("volume"), py::arg("band"));
    m.def("save_volume", &save_volume, py::arg("volume"), py::arg("path"));
    m.def("load_volume", &load_volume, py::arg("path"));
    m.def("save_labels", &save_labels, py::arg("labels"), py::arg("path"));
    m.def("load_labels", &load_labels, py::arg("path"));

    // normals
    m.def(
        "gradients",
        [](const TsdfVolume& vol) {
            VectorField g = gradient_central(vol);
            const GridSpec& s = g.spec;
            std::vector<double> x(s.voxel_count()), y(s.voxel_count()), z(s.voxel_count());
            std::vector<std::uint8_t> valid(g.valid);
            for (std::size_t i = 0; i < x.size(); ++i) {
                x[i] = g.vectors[i].x();
                y[i] = g.vectors[i].y();
                z[i] = g.vectors[i].z();
            }
            py::dict d;
            d["x"] = grid_values_to_array(s, x);
            d["y"] = grid_values_to_array(s, y);
            d["z"] = grid_values_to_array(s, z);
            py::array_t<std::uint8_t> varr(
                {s.dims.x(), s.dims.y(), s.dims.z()},
                {py::ssize_t(1), py::ssize_t(s.dims.x()),
                 py::ssize_t(s.dims.x()) * s.dims.y()});
            std::copy(valid.begin(), valid.end(), varr.mutable_data());
            d["valid"] = varr;
            return d;
        },
        py::arg("volume"), "central-difference gradient components and validity mask");

    // refinement
    m.def(
        "refine",
        [](const TsdfVolume& init, const TsdfVolume& obs, const SemanticVolume* sem,
           const TsdfVolume* gt_tsdf, const std::string& config_json) {
            RefineConfig cfg = config_json.empty()
                                   ? RefineConfig{}
                                   : refine_config_from_json(nlohmann::json::parse(config_json));
            std::optional<NormalField> gtn;
            if (gt_tsdf) gtn = normalize_field(gradient_central(*gt_tsdf), cfg.eps_normalize);
            auto [vol, report] = refine(init, obs, sem, gtn ? &*gtn : nullptr, cfg);
            nlohmann::json rj = refine_report_to_json(report, cfg.resolved(init.spec()));
            return py::make_tuple(vol, py::module_::import("json").attr("loads")(rj.dump()));
        },
        py::arg("init"), py::arg("obs"), py::arg("sem") = nullptr, py::arg("gt_tsdf") = nullptr,
        py::arg("config_json") = std::string(),
        "two-stage refinement; returns (volume, report dict)");
    m.def(
        "total_loss",
        [](const TsdfVolume& vol, const TsdfVolume& obs, const SemanticVolume* sem,
           const TsdfVolume* gt_tsdf, double lambda_fawn, double lambda_norm, double lambda_data,
           double band_fawn, double band_eikonal) {
            LossWeights w{lambda_fawn, lambda_norm, lambda_data};
            std::optional<NormalField> gtn;
            if (gt_tsdf) gtn = normalize_field(gradient_central(*gt_tsdf), 1e-8);
            BandWidths bands{band_fawn > 0 ? band_fawn : vol.spec().voxel_size,
                             band_eikonal > 0 ? band_eikonal : 3.0 * vol.spec().voxel_size};
            return breakdown_to_dict(
                total_loss(vol, obs, sem, gtn ? &*gtn : nullptr, w, bands));
        },
        py::arg("volume"), py::arg("obs"), py::arg("sem") = nullptr, py::arg("gt_tsdf") = nullptr,
        py::arg("lambda_fawn") = 1e-3, py::arg("lambda_norm") = 1e-4, py::arg("lambda_data") = 1.0,
        py::arg("band_fawn") = 0.0, py::arg("band_eikonal") = 0.0);

    // surface
    m.def("marching_cubes", &marching_cubes, py::arg("volume"), py::arg("iso") = 0.0);
    m.def(
        "sample_points",
        [](const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
            return points_to_array(sample_points(mesh, n, seed).points);
        },
        py::arg("mesh"), py::arg("n"), py::arg("seed"));
    m.def("save_mesh", &save_mesh, py::arg("mesh"), py::arg("path"), py::arg("ascii") = false);
    m.def("load_mesh", &load_mesh, py::arg("path"));

    // evaluation
    m.def(
        "render_depth",
        [](const TriangleMesh& mesh, const PinholeCamera& cam) {
            return depth_to_array(render_depth(mesh, cam));
        },
        py::arg("mesh"), py::arg("camera"));
    m.def(
        "coverage",
        [](const TriangleMesh& mesh, const std::vector<PinholeCamera>& cams) {
            return coverage(mesh, cams);
        },
        py::arg("mesh"), py::arg("cameras"));
    m.def(
        "point_metrics",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pred,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& gt,
           double threshold) {
            auto to_cloud = [](const py::array_t<double, py::array::c_style |
                                                              py::array::forcecast>& a) {
                if (a.ndim() != 2 || a.shape(1) != 3) throw InputError("cloud must be (n, 3)");
                PointCloud c;
                auto r = a.unchecked<2>();
                for (py::ssize_t i = 0; i < a.shape(0); ++i) {
                    c.points.emplace_back(r(i, 0), r(i, 1), r(i, 2));
                }
                return c;
            };
            PointMetrics pm = point_metrics(to_cloud(pred), to_cloud(gt), threshold);
            py::dict d;
            d["acc_m"] = pm.acc_m;
            d["comp_m"] = pm.comp_m;
            d["prec_pct"] = pm.prec_pct;
            d["recall_pct"] = pm.recall_pct;
            d["fscore_pct"] = pm.fscore_pct;
            return d;
        },
        py::arg("pred"), py::arg("gt"), py::arg("threshold") = 0.05);
    m.def(
        "evaluate_protocol",
        [](const TriangleMesh& pred, const TriangleMesh& gt,
           const std::vector<PinholeCamera>& cams, const GridSpec& spec, std::size_t n_sample,
           std::uint64_t seed, double threshold) {
            EvalOptions opts;
            opts.n_sample = n_sample;
            opts.seed = seed;
            opts.threshold = threshold;
            return metrics_to_dict(evaluate_protocol(pred, gt, cams, spec, opts));
        },
        py::arg("pred_mesh"), py::arg("gt_mesh"), py::arg("cameras"), py::arg("spec"),
        py::arg("n_sample") = 200000, py::arg("seed") = 0, py::arg("threshold") = 0.05);
    m.def(
        "fuse_depths",
        [](const std::vector<py::array_t<float, py::array::c_style | py::array::forcecast>>&
               depths,
           const std::vector<PinholeCamera>& cams, const GridSpec& spec) {
            std::vector<DepthMap> ds;
            ds.reserve(depths.size());
            for (const auto& a : depths) ds.push_back(depth_from_array(a));
            return fuse_depths(ds, cams, spec);
        },
        py::arg("depths"), py::arg("cameras"), py::arg("spec"));

    // synthetic scenes
    m.def(
        "generate_room",
        [](const std::string& spec_json) {
            return generate_room(scene_spec_from_json(nlohmann::json::parse(spec_json)));
        },
        py::arg("spec_json"), "build a scene bundle from a scene-spec JSON string");
    m.def(
        "perturb_tsdf",
        [](const TsdfVolume& gt, double noise_sigma, std::uint64_t seed) {
            return perturb_tsdf(gt, noise_sigma, {}, seed);
        },
        py::arg("gt"), py::arg("noise_sigma"), py::arg("seed"));

    m.def("set_thread_cap", &detail::set_thread_cap, py::arg("n"));
}
