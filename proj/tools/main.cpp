#include <chrono>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "fawn/detail/parallel.hpp"
#include "fawn/json_io.hpp"
#include "fawn/refine.hpp"
#include "fawn/synth.hpp"
#include "fawn/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadInput = 2;
constexpr int kExitIo = 3;
constexpr int kExitDiverged = 4;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void emit_json(const json& j, const std::string& out_path) {
    if (out_path.empty() || out_path == "-") {
        std::cout << j.dump(2) << "\n";
    } else {
        fawn::write_json_file(j, out_path);
    }
}

int cmd_generate(const std::string& spec_path, const std::string& out_dir, bool dump_normals) {
    auto t0 = std::chrono::steady_clock::now();
    fawn::SceneSpec spec = fawn::scene_spec_from_json(fawn::parse_json_file(spec_path));

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw fawn::IoError("cannot create directory " + out_dir + ": " + ec.message());

    fawn::SceneBundle bundle = fawn::generate_room(spec);
    fs::path dir(out_dir);
    fawn::save_volume(bundle.gt_tsdf, dir / "gt.fvol");
    fawn::save_mesh(bundle.gt_mesh, dir / "gt.ply");
    fawn::save_labels(bundle.semantics, dir / "sem.fsem");
    fawn::save_volume(bundle.obs_tsdf, dir / "obs.fvol");
    fawn::save_cameras(bundle.cameras, dir / "cams.json");
    fawn::write_json_file(fawn::grid_spec_to_json(bundle.gt_tsdf.spec()), dir / "grid.json");
    if (dump_normals) fawn::save_vector_field(bundle.gt_normals, dir / "gt_normals.fvec");

    json manifest = {{"command", "generate"},
                     {"version", fawn::kVersion},
                     {"inputs", {{"spec", spec_path}}},
                     {"config_hash", fawn::file_digest_hex(spec_path)},
                     {"seed", spec.seed},
                     {"outputs",
                      {"gt.fvol", "gt.ply", "sem.fsem", "obs.fvol", "cams.json", "grid.json"}},
                     {"timing_s", seconds_since(t0)}};
    fawn::write_json_file(manifest, dir / "manifest.json");
    return kExitOk;
}

int cmd_refine(const std::string& tsdf_path, const std::string& sem_path,
               const std::string& gt_normals_path, const std::string& config_path,
               const std::string& out_path, const std::string& report_path) {
    fawn::RefineConfig cfg = config_path.empty()
                                 ? fawn::RefineConfig{}
                                 : fawn::refine_config_from_json(fawn::parse_json_file(config_path));
    fawn::TsdfVolume obs = fawn::load_volume(tsdf_path);

    std::optional<fawn::SemanticVolume> sem;
    if (!sem_path.empty()) sem = fawn::load_labels(sem_path);
    if (!sem && cfg.weights.lambda_fawn > 0.0) {
        throw fawn::InputError("--sem is required when lambda_fawn > 0");
    }

    std::optional<fawn::NormalField> gt_normals;
    if (!gt_normals_path.empty()) {
        fawn::TsdfVolume gt = fawn::load_volume(gt_normals_path);
        gt_normals = fawn::normalize_field(fawn::gradient_central(gt), cfg.eps_normalize);
    }

    const fawn::RefineConfig resolved = cfg.resolved(obs.spec());
    auto write_report = [&](const fawn::RefineReport& report) {
        if (report_path.empty()) return;
        json j = fawn::refine_report_to_json(report, resolved);
        j["manifest"] = {{"command", "refine"},
                         {"version", fawn::kVersion},
                         {"inputs",
                          {{"tsdf", tsdf_path},
                           {"sem", sem_path},
                           {"gt_normals", gt_normals_path},
                           {"config", config_path}}},
                         {"config_hash", config_path.empty()
                                             ? std::string("default")
                                             : fawn::file_digest_hex(config_path)},
                         {"seed", cfg.seed}};
        fawn::write_json_file(j, report_path);
    };

    try {
        auto [refined, report] = fawn::refine(obs, obs, sem ? &*sem : nullptr,
                                              gt_normals ? &*gt_normals : nullptr, cfg);
        fawn::save_volume(refined, out_path);
        write_report(report);
    } catch (const fawn::DivergenceError& e) {
        write_report(e.report());
        std::cerr << "fawn refine: diverged: " << e.what() << "\n";
        return kExitDiverged;
    }
    return kExitOk;
}

int cmd_extract(const std::string& tsdf_path, double iso, const std::string& out_path,
                bool ascii) {
    fawn::TsdfVolume vol = fawn::load_volume(tsdf_path);
    fawn::save_mesh(fawn::marching_cubes(vol, iso), out_path, ascii);
    return kExitOk;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path,
             const std::string& cams_path, const std::string& grid_path, std::size_t samples,
             std::uint64_t seed, double threshold, const std::string& out_path) {
    fawn::TriangleMesh pred = fawn::load_mesh(pred_path);
    fawn::TriangleMesh gt = fawn::load_mesh(gt_path);
    std::vector<fawn::PinholeCamera> cams = fawn::load_cameras(cams_path);
    fawn::GridSpec grid = fawn::grid_spec_from_json(fawn::parse_json_file(grid_path));

    fawn::EvalOptions opts;
    opts.n_sample = samples;
    opts.seed = seed;
    opts.threshold = threshold;
    fawn::MetricsReport m = fawn::evaluate_protocol(pred, gt, cams, grid, opts);
    emit_json(fawn::metrics_report_to_json(m), out_path);
    return kExitOk;
}

int cmd_coverage(const std::string& mesh_path, const std::string& cams_path,
                 const std::string& out_path) {
    fawn::TriangleMesh mesh = fawn::load_mesh(mesh_path);
    std::vector<fawn::PinholeCamera> cams = fawn::load_cameras(cams_path);
    double cov = mesh.empty() ? 0.0 : fawn::coverage(mesh, cams);
    emit_json(json{{"coverage_pct", cov}}, out_path);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TSDF refinement with floor-and-walls normal regularization"};
    app.set_version_flag("--version", fawn::kVersion);
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "cap worker threads (0 = all cores)");

    auto* gen = app.add_subcommand("generate", "generate a synthetic scene bundle");
    std::string gen_spec, gen_out;
    bool gen_normals = false;
    gen->add_option("--spec", gen_spec, "scene spec JSON")->required();
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_flag("--dump-normals", gen_normals, "also write gt_normals.fvec");

    auto* ref = app.add_subcommand("refine", "optimize a TSDF volume");
    std::string ref_tsdf, ref_sem, ref_gtn, ref_cfg, ref_out, ref_report;
    ref->add_option("--tsdf", ref_tsdf, "observed TSDF volume (FVOL)")->required();
    ref->add_option("--sem", ref_sem, "semantic labels (FSEM)");
    ref->add_option("--gt-normals", ref_gtn, "GT TSDF volume; supervision normals come from it");
    ref->add_option("--config", ref_cfg, "refine config JSON (defaults when omitted)");
    ref->add_option("--out", ref_out, "refined volume output (FVOL)")->required();
    ref->add_option("--report", ref_report, "refine report JSON");

    auto* ext = app.add_subcommand("extract", "extract the zero isosurface mesh");
    std::string ext_tsdf, ext_out;
    double ext_iso = 0.0;
    bool ext_ascii = false;
    ext->add_option("--tsdf", ext_tsdf, "TSDF volume (FVOL)")->required();
    ext->add_option("--iso", ext_iso, "iso value (default 0)");
    ext->add_option("--out", ext_out, "mesh output (PLY)")->required();
    ext->add_flag("--ascii", ext_ascii, "write ASCII PLY instead of binary");

    auto* ev = app.add_subcommand("eval", "run the full evaluation protocol");
    std::string ev_pred, ev_gt, ev_cams, ev_grid, ev_out;
    std::size_t ev_samples = 200000;
    std::uint64_t ev_seed = 0;
    double ev_threshold = 0.05;
    ev->add_option("--pred", ev_pred, "predicted mesh (PLY)")->required();
    ev->add_option("--gt", ev_gt, "ground truth mesh (PLY)")->required();
    ev->add_option("--cams", ev_cams, "camera list JSON")->required();
    ev->add_option("--grid", ev_grid, "grid spec JSON for re-fusion")->required();
    ev->add_option("--samples", ev_samples, "points sampled per mesh");
    ev->add_option("--seed", ev_seed, "sampling seed");
    ev->add_option("--threshold", ev_threshold, "precision/recall distance threshold (m)");
    ev->add_option("--out", ev_out, "metrics JSON ('-' or omit for stdout)");

    auto* cov = app.add_subcommand("coverage", "mean valid-pixel percentage over frames");
    std::string cov_mesh, cov_cams, cov_out;
    cov->add_option("--mesh", cov_mesh, "mesh (PLY)")->required();
    cov->add_option("--cams", cov_cams, "camera list JSON")->required();
    cov->add_option("--out", cov_out, "output JSON ('-' or omit for stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitBadInput;
    }

    fawn::detail::set_thread_cap(threads);

    try {
        if (*gen) return cmd_generate(gen_spec, gen_out, gen_normals);
        if (*ref) return cmd_refine(ref_tsdf, ref_sem, ref_gtn, ref_cfg, ref_out, ref_report);
        if (*ext) return cmd_extract(ext_tsdf, ext_iso, ext_out, ext_ascii);
        if (*ev) {
            return cmd_eval(ev_pred, ev_gt, ev_cams, ev_grid, ev_samples, ev_seed, ev_threshold,
                            ev_out);
        }
        if (*cov) return cmd_coverage(cov_mesh, cov_cams, cov_out);
    } catch (const fawn::IoError& e) {
        std::cerr << "fawn: IO error: " << e.what() << "\n";
        return kExitIo;
    } catch (const fawn::InputError& e) {
        std::cerr << "fawn: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const std::exception& e) {
        std::cerr << "fawn: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
