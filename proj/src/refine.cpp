#include "fawn/refine.hpp"

#include <atomic>
#include <chrono>
#include <cmath>

#include "fawn/detail/parallel.hpp"

namespace fawn {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// in-place update; returns false when a non-finite value appears
bool apply_step(TsdfVolume& vol, std::span<const double> grad, OptimizerState& state,
                double step_size, OptimizerKind kind, bool clamp) {
    const std::size_t n = vol.spec().voxel_count();
    if (grad.size() != n) throw InputError("step: gradient size does not match volume");
    std::span<double> f = vol.values();
    const double tau = vol.spec().truncation;
    std::atomic<bool> finite{true};

    if (kind == OptimizerKind::kPlainGradient) {
        detail::parallel_for(0, static_cast<std::int64_t>(n), [&](std::int64_t i) {
            double x = f[i] - step_size * grad[i];
            if (clamp) x = std::clamp(x, -tau, tau);
            if (!std::isfinite(x)) finite.store(false, std::memory_order_relaxed);
            f[i] = x;
        });
        return finite.load();
    }

    if (state.m.size() != n) {
        state.m.assign(n, 0.0);
        state.v.assign(n, 0.0);
        state.t = 0;
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(kBeta1, state.t);
    const double bc2 = 1.0 - std::pow(kBeta2, state.t);
    detail::parallel_for(0, static_cast<std::int64_t>(n), [&](std::int64_t i) {
        double g = grad[i];
        double m = kBeta1 * state.m[i] + (1.0 - kBeta1) * g;
        double v = kBeta2 * state.v[i] + (1.0 - kBeta2) * g * g;
        state.m[i] = m;
        state.v[i] = v;
        double update = step_size * (m / bc1) / (std::sqrt(v / bc2) + kAdamEps);
        double x = f[i] - update;
        if (clamp) x = std::clamp(x, -tau, tau);
        if (!std::isfinite(x)) finite.store(false, std::memory_order_relaxed);
        f[i] = x;
    });
    return finite.load();
}

}  // namespace

RefineConfig RefineConfig::resolved(const GridSpec& spec) const {
    RefineConfig r = *this;
    const double h = spec.voxel_size;
    if (r.step_size <= 0.0) r.step_size = 1e-2 * h;
    if (r.band_fawn <= 0.0) r.band_fawn = 1.0 * h;
    if (r.band_eikonal <= 0.0) r.band_eikonal = 3.0 * h;
    r.validate();
    return r;
}

void RefineConfig::validate() const {
    if (stage1_iters < 0 || stage2_iters < 0) {
        throw InputError("RefineConfig: iteration counts must be >= 0");
    }
    if (step_size > 0.0 && !std::isfinite(step_size)) {
        throw InputError("RefineConfig: step_size must be finite");
    }
    if (!(eps_normalize > 0.0)) {
        throw InputError("RefineConfig: eps_normalize must be positive");
    }
    weights.validate();
}

TsdfVolume step(const TsdfVolume& vol, std::span<const double> grad, OptimizerState& state,
                double step_size, OptimizerKind kind, bool clamp_to_truncation) {
    if (!(step_size > 0.0)) throw InputError("step: step_size must be positive");
    TsdfVolume out = vol;
    if (!apply_step(out, grad, state, step_size, kind, clamp_to_truncation)) {
        throw InputError("step: non-finite update");
    }
    return out;
}

std::pair<TsdfVolume, RefineReport> refine(const TsdfVolume& init, const TsdfVolume& obs,
                                           const SemanticVolume* sem,
                                           const NormalField* gt_normals,
                                           const RefineConfig& config) {
    if (!(init.spec() == obs.spec())) throw SpecMismatchError("refine: init vs obs");
    if (sem && !(sem->spec() == init.spec())) throw SpecMismatchError("refine: init vs semantics");
    if (gt_normals && !(gt_normals->spec == init.spec())) {
        throw SpecMismatchError("refine: init vs gt normals");
    }
    const RefineConfig cfg = config.resolved(init.spec());

    TsdfVolume vol = init;
    RefineReport report;
    report.trajectory.reserve(static_cast<std::size_t>(cfg.stage1_iters) + cfg.stage2_iters);
    OptimizerState state;
    const NormalOptions opts = cfg.normal_options();

    for (int stage = 1; stage <= 2; ++stage) {
        LossWeights eff = cfg.weights;
        if (stage == 1) {
            // geometry is not penalized yet: observation term only
            eff.lambda_fawn = 0.0;
            eff.lambda_norm = 0.0;
        }
        state.reset();
        const int iters = stage == 1 ? cfg.stage1_iters : cfg.stage2_iters;
        auto t0 = std::chrono::steady_clock::now();
        for (int it = 0; it < iters; ++it) {
            TermSets sets = collect_term_sets(vol, sem, gt_normals, cfg.bands(), opts);
            LossBreakdown b = total_loss(vol, obs, sem, gt_normals, eff, sets, opts);
            if (!std::isfinite(b.total)) {
                report.aborted = true;
                report.abort_iteration = static_cast<int>(report.trajectory.size());
                report.abort_reason = "non-finite objective in stage " + std::to_string(stage);
                throw DivergenceError(report.abort_reason, std::move(report));
            }
            report.trajectory.push_back(b);
            std::vector<double> g = grad_total(vol, obs, sem, gt_normals, eff, sets, opts);
            if (!apply_step(vol, g, state, cfg.step_size, cfg.optimizer,
                            cfg.clamp_to_truncation)) {
                report.aborted = true;
                report.abort_iteration = static_cast<int>(report.trajectory.size());
                report.abort_reason = "non-finite update in stage " + std::to_string(stage);
                throw DivergenceError(report.abort_reason, std::move(report));
            }
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        (stage == 1 ? report.stage1_seconds : report.stage2_seconds) = secs;
    }
    report.final = total_loss(vol, obs, sem, gt_normals, cfg.weights, cfg.bands(), opts);
    return {std::move(vol), std::move(report)};
}

}  // namespace fawn
