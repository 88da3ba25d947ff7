#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fawn/losses.hpp"
#include "fawn/volume.hpp"

namespace fawn {

enum class OptimizerKind {
    kPlainGradient,
    kAdaptiveMoments,
};

/// Two-stage refinement schedule. Stage 1 runs the observation term alone
/// (lambda_fawn and lambda_norm forced to zero), stage 2 the full objective.
/// Zero/negative step_size and band widths resolve to grid-relative
/// defaults: step 1e-2*h, band_fawn 1.0*h, band_eikonal 3.0*h.
struct RefineConfig {
    int stage1_iters = 200;
    int stage2_iters = 800;
    double step_size = 0.0;
    OptimizerKind optimizer = OptimizerKind::kAdaptiveMoments;
    LossWeights weights;
    double band_fawn = 0.0;
    double band_eikonal = 0.0;
    double eps_normalize = 1e-8;
    bool clamp_to_truncation = true;
    std::uint64_t seed = 0;
    bool raw_gradient_normals = false;

    RefineConfig resolved(const GridSpec& spec) const;
    void validate() const;

    BandWidths bands() const { return {band_fawn, band_eikonal}; }
    NormalOptions normal_options() const { return {eps_normalize, raw_gradient_normals}; }
};

/// Breakdown at the start of every iteration (stage-effective weights in
/// `total`), plus the full-objective breakdown of the output volume.
struct RefineReport {
    std::vector<LossBreakdown> trajectory;
    LossBreakdown final;
    double stage1_seconds = 0.0;
    double stage2_seconds = 0.0;
    bool aborted = false;
    int abort_iteration = -1;
    std::string abort_reason;
};

/// Raised when the objective goes non-finite; carries the trajectory up to
/// the last finite breakdown.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& msg, RefineReport report)
        : std::runtime_error(msg), report_(std::move(report)) {}
    const RefineReport& report() const { return report_; }

private:
    RefineReport report_;
};

/// Adaptive-moments accumulators. Decay 0.9 / 0.999, stabilizer 1e-8,
/// bias correction by 1/(1 - beta^t) with t counting applied steps; the
/// state resets at the stage boundary.
struct OptimizerState {
    int t = 0;
    std::vector<double> m;
    std::vector<double> v;

    void reset() {
        t = 0;
        m.clear();
        v.clear();
    }
};

/// One descent step; clamps to [-tau, tau] afterwards when asked.
TsdfVolume step(const TsdfVolume& vol, std::span<const double> grad, OptimizerState& state,
                double step_size, OptimizerKind kind, bool clamp_to_truncation);

/// Minimize the total objective over the voxel values. Deterministic for
/// fixed inputs and config.
std::pair<TsdfVolume, RefineReport> refine(const TsdfVolume& init, const TsdfVolume& obs,
                                           const SemanticVolume* sem,
                                           const NormalField* gt_normals,
                                           const RefineConfig& cfg);

}  // namespace fawn
