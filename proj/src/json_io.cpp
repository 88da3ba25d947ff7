#include "fawn/json_io.hpp"

#include <fstream>
#include <sstream>

namespace fawn {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) {
            if (key == a) {
                ok = true;
                break;
            }
        }
        if (!ok) throw InputError(std::string(what) + ": unknown field \"" + key + "\"");
    }
}

Eigen::Vector3d vec3_from(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) {
        throw InputError(std::string(what) + " must be an array of 3 numbers");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec3_to(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

nlohmann::json parse_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        // translate the byte offset into line/column
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw InputError("malformed JSON in " + path.string() + " at line " +
                         std::to_string(line) + ", column " + std::to_string(col) + ": " +
                         e.what());
    }
}

void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed for " + path.string());
}

nlohmann::json grid_spec_to_json(const GridSpec& spec) {
    return {{"dims", {spec.dims.x(), spec.dims.y(), spec.dims.z()}},
            {"origin", vec3_to(spec.origin)},
            {"voxel_size", spec.voxel_size},
            {"truncation", spec.truncation}};
}

GridSpec grid_spec_from_json(const nlohmann::json& j) {
    check_keys(j, {"dims", "origin", "voxel_size", "truncation"}, "grid spec");
    GridSpec s;
    const auto& dims = j.at("dims");
    if (!dims.is_array() || dims.size() != 3) throw InputError("grid spec: dims must have 3 entries");
    s.dims = {dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>()};
    s.origin = vec3_from(j.at("origin"), "grid spec: origin");
    s.voxel_size = j.at("voxel_size").get<double>();
    s.truncation = j.at("truncation").get<double>();
    s.validate();
    return s;
}

nlohmann::json loss_breakdown_to_json(const LossBreakdown& b) {
    return {{"floor", b.floor},
            {"walls", b.walls},
            {"fawn", b.fawn},
            {"norm_cosine", b.norm_cosine},
            {"norm_euclid", b.norm_euclid},
            {"eikonal", b.eikonal},
            {"data", b.data},
            {"total", b.total},
            {"counts",
             {{"floor", b.counts.floor},
              {"walls", b.counts.walls},
              {"normal", b.counts.normal},
              {"eikonal", b.counts.eikonal},
              {"data", b.counts.data}}}};
}

nlohmann::json refine_config_to_json(const RefineConfig& cfg) {
    return {{"stage1_iters", cfg.stage1_iters},
            {"stage2_iters", cfg.stage2_iters},
            {"step_size", cfg.step_size},
            {"optimizer", cfg.optimizer == OptimizerKind::kAdaptiveMoments ? "adaptive-moments"
                                                                           : "plain-gradient"},
            {"weights",
             {{"lambda_fawn", cfg.weights.lambda_fawn},
              {"lambda_norm", cfg.weights.lambda_norm},
              {"lambda_data", cfg.weights.lambda_data}}},
            {"band_fawn", cfg.band_fawn},
            {"band_eikonal", cfg.band_eikonal},
            {"eps_normalize", cfg.eps_normalize},
            {"clamp_to_truncation", cfg.clamp_to_truncation},
            {"seed", cfg.seed},
            {"raw_gradient_normals", cfg.raw_gradient_normals}};
}

RefineConfig refine_config_from_json(const nlohmann::json& j) {
    check_keys(j,
               {"stage1_iters", "stage2_iters", "step_size", "optimizer", "weights", "band_fawn",
                "band_eikonal", "eps_normalize", "clamp_to_truncation", "seed",
                "raw_gradient_normals"},
               "refine config");
    RefineConfig cfg;
    if (j.contains("stage1_iters")) cfg.stage1_iters = j["stage1_iters"].get<int>();
    if (j.contains("stage2_iters")) cfg.stage2_iters = j["stage2_iters"].get<int>();
    if (j.contains("step_size")) cfg.step_size = j["step_size"].get<double>();
    if (j.contains("optimizer")) {
        std::string o = j["optimizer"].get<std::string>();
        if (o == "adaptive-moments") {
            cfg.optimizer = OptimizerKind::kAdaptiveMoments;
        } else if (o == "plain-gradient") {
            cfg.optimizer = OptimizerKind::kPlainGradient;
        } else {
            throw InputError("refine config: unknown optimizer \"" + o + "\"");
        }
    }
    if (j.contains("weights")) {
        const auto& w = j["weights"];
        check_keys(w, {"lambda_fawn", "lambda_norm", "lambda_data"}, "refine config weights");
        if (w.contains("lambda_fawn")) cfg.weights.lambda_fawn = w["lambda_fawn"].get<double>();
        if (w.contains("lambda_norm")) cfg.weights.lambda_norm = w["lambda_norm"].get<double>();
        if (w.contains("lambda_data")) cfg.weights.lambda_data = w["lambda_data"].get<double>();
    }
    if (j.contains("band_fawn")) cfg.band_fawn = j["band_fawn"].get<double>();
    if (j.contains("band_eikonal")) cfg.band_eikonal = j["band_eikonal"].get<double>();
    if (j.contains("eps_normalize")) cfg.eps_normalize = j["eps_normalize"].get<double>();
    if (j.contains("clamp_to_truncation")) {
        cfg.clamp_to_truncation = j["clamp_to_truncation"].get<bool>();
    }
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("raw_gradient_normals")) {
        cfg.raw_gradient_normals = j["raw_gradient_normals"].get<bool>();
    }
    cfg.validate();
    return cfg;
}

nlohmann::json refine_report_to_json(const RefineReport& report, const RefineConfig& cfg) {
    json traj = json::array();
    for (const auto& b : report.trajectory) traj.push_back(loss_breakdown_to_json(b));
    json out = {{"config", refine_config_to_json(cfg)},
                {"trajectory", traj},
                {"final", loss_breakdown_to_json(report.final)},
                {"aborted", report.aborted},
                {"timing",
                 {{"stage1_seconds", report.stage1_seconds},
                  {"stage2_seconds", report.stage2_seconds}}}};
    if (report.aborted) {
        out["abort_iteration"] = report.abort_iteration;
        out["abort_reason"] = report.abort_reason;
    }
    return out;
}

nlohmann::json metrics_report_to_json(const MetricsReport& m) {
    return {{"acc_cm", m.acc_cm},         {"comp_cm", m.comp_cm},
            {"prec_pct", m.prec_pct},     {"recall_pct", m.recall_pct},
            {"fscore_pct", m.fscore_pct}, {"coverage_pct", m.coverage_pct}};
}

nlohmann::json camera_to_json(const PinholeCamera& cam) {
    json pose = json::array();
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) pose.push_back(cam.pose(r, c));
    }
    return {{"fx", cam.fx},       {"fy", cam.fy},         {"cx", cam.cx},
            {"cy", cam.cy},       {"width", cam.width},   {"height", cam.height},
            {"pose", pose}};
}

PinholeCamera camera_from_json(const nlohmann::json& j) {
    check_keys(j, {"fx", "fy", "cx", "cy", "width", "height", "pose"}, "camera");
    PinholeCamera cam;
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    const auto& pose = j.at("pose");
    if (!pose.is_array() || pose.size() != 16) {
        throw InputError("camera: pose must be 16 numbers, row-major");
    }
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) cam.pose(r, c) = pose[4 * r + c].get<double>();
    }
    cam.validate();
    return cam;
}

void save_cameras(std::span<const PinholeCamera> cams, const std::filesystem::path& path) {
    json arr = json::array();
    for (const auto& cam : cams) arr.push_back(camera_to_json(cam));
    write_json_file(arr, path);
}

std::vector<PinholeCamera> load_cameras(const std::filesystem::path& path) {
    json arr = parse_json_file(path);
    if (!arr.is_array() || arr.empty()) {
        throw InputError("cameras file must be a non-empty JSON array: " + path.string());
    }
    std::vector<PinholeCamera> cams;
    cams.reserve(arr.size());
    for (const auto& j : arr) cams.push_back(camera_from_json(j));
    return cams;
}

nlohmann::json scene_spec_to_json(const SceneSpec& spec) {
    json clutter = json::array();
    for (const auto& b : spec.clutter) {
        clutter.push_back(
            {{"center", vec3_to(b.center)}, {"size", vec3_to(b.size)}, {"yaw_deg", b.yaw_deg}});
    }
    json holes = json::array();
    for (const auto& h : spec.holes) {
        holes.push_back({{"center", vec3_to(h.center)}, {"radius", h.radius}});
    }
    return {{"room_extent", vec3_to(spec.room_extent)},
            {"wall_tilt_deg", spec.wall_tilt_deg},
            {"floor_waviness",
             {{"amplitude", spec.floor_waviness.amplitude},
              {"wavelength", spec.floor_waviness.wavelength}}},
            {"clutter", clutter},
            {"noise_sigma", spec.noise_sigma},
            {"holes", holes},
            {"trajectory",
             {{"count", spec.trajectory.count},
              {"orbit_radius", spec.trajectory.orbit_radius},
              {"orbit_height", spec.trajectory.orbit_height},
              {"target_height", spec.trajectory.target_height},
              {"fov_deg", spec.trajectory.fov_deg},
              {"width", spec.trajectory.width},
              {"height", spec.trajectory.height}}},
            {"voxel_size", spec.voxel_size},
            {"truncation", spec.truncation},
            {"margin", spec.margin},
            {"seed", spec.seed}};
}

SceneSpec scene_spec_from_json(const nlohmann::json& j) {
    check_keys(j,
               {"room_extent", "wall_tilt_deg", "floor_waviness", "clutter", "noise_sigma",
                "holes", "trajectory", "voxel_size", "truncation", "margin", "seed"},
               "scene spec");
    SceneSpec spec;
    if (j.contains("room_extent")) {
        spec.room_extent = vec3_from(j["room_extent"], "scene spec: room_extent");
    }
    if (j.contains("wall_tilt_deg")) {
        const auto& t = j["wall_tilt_deg"];
        if (!t.is_array() || t.size() != 4) {
            throw InputError("scene spec: wall_tilt_deg must have 4 entries (-x, +x, -y, +y)");
        }
        for (int i = 0; i < 4; ++i) spec.wall_tilt_deg[i] = t[i].get<double>();
    }
    if (j.contains("floor_waviness")) {
        const auto& w = j["floor_waviness"];
        check_keys(w, {"amplitude", "wavelength"}, "scene spec floor_waviness");
        if (w.contains("amplitude")) spec.floor_waviness.amplitude = w["amplitude"].get<double>();
        if (w.contains("wavelength")) {
            spec.floor_waviness.wavelength = w["wavelength"].get<double>();
        }
    }
    if (j.contains("clutter")) {
        for (const auto& b : j["clutter"]) {
            check_keys(b, {"center", "size", "yaw_deg"}, "scene spec clutter box");
            BoxSpec box;
            box.center = vec3_from(b.at("center"), "clutter box center");
            box.size = vec3_from(b.at("size"), "clutter box size");
            if (b.contains("yaw_deg")) box.yaw_deg = b["yaw_deg"].get<double>();
            spec.clutter.push_back(box);
        }
    }
    if (j.contains("noise_sigma")) spec.noise_sigma = j["noise_sigma"].get<double>();
    if (j.contains("holes")) {
        for (const auto& h : j["holes"]) {
            check_keys(h, {"center", "radius"}, "scene spec hole");
            SphereSpec s;
            s.center = vec3_from(h.at("center"), "hole center");
            s.radius = h.at("radius").get<double>();
            spec.holes.push_back(s);
        }
    }
    if (j.contains("trajectory")) {
        const auto& t = j["trajectory"];
        check_keys(t,
                   {"count", "orbit_radius", "orbit_height", "target_height", "fov_deg", "width",
                    "height"},
                   "scene spec trajectory");
        if (t.contains("count")) spec.trajectory.count = t["count"].get<int>();
        if (t.contains("orbit_radius")) spec.trajectory.orbit_radius = t["orbit_radius"].get<double>();
        if (t.contains("orbit_height")) spec.trajectory.orbit_height = t["orbit_height"].get<double>();
        if (t.contains("target_height")) {
            spec.trajectory.target_height = t["target_height"].get<double>();
        }
        if (t.contains("fov_deg")) spec.trajectory.fov_deg = t["fov_deg"].get<double>();
        if (t.contains("width")) spec.trajectory.width = t["width"].get<int>();
        if (t.contains("height")) spec.trajectory.height = t["height"].get<int>();
    }
    if (j.contains("voxel_size")) spec.voxel_size = j["voxel_size"].get<double>();
    if (j.contains("truncation")) spec.truncation = j["truncation"].get<double>();
    if (j.contains("margin")) spec.margin = j["margin"].get<double>();
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    spec.validate();
    return spec;
}

std::string digest_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_digest_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return digest_hex(ss.str());
}

}  // namespace fawn
