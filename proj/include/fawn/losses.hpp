#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fawn/normals.hpp"
#include "fawn/volume.hpp"

namespace fawn {

/// Weights of the total objective. lambda_data scales the observation
/// fidelity term, lambda_norm the supervised-normal + eikonal block,
/// lambda_fawn the floor/walls normal regularizer.
struct LossWeights {
    double lambda_fawn = 1e-3;
    double lambda_norm = 1e-4;
    double lambda_data = 1.0;

    void validate() const;
};

struct TermCounts {
    std::size_t floor = 0;
    std::size_t walls = 0;
    std::size_t normal = 0;
    std::size_t eikonal = 0;
    std::size_t data = 0;
};

/// Per-term values (unweighted) plus the weighted total. Terms with no
/// contributing voxels are exactly zero.
struct LossBreakdown {
    double floor = 0.0;
    double walls = 0.0;
    double fawn = 0.0;
    double norm_cosine = 0.0;
    double norm_euclid = 0.0;
    double eikonal = 0.0;
    double data = 0.0;
    double total = 0.0;
    TermCounts counts;
};

/// How normals enter the losses. raw_gradient = use the unnormalized TSDF
/// gradient in place of the unit normal (comparison mode).
struct NormalOptions {
    double eps = 1e-8;
    bool raw_gradient = false;
};

/// Band widths in meters: FAWN + supervised-normal terms on `fawn`,
/// eikonal on `eikonal`.
struct BandWidths {
    double fawn = 0.0;
    double eikonal = 0.0;
};

/// Voxel index sets each term sums over. Membership is frozen per
/// evaluation: the gradient differentiates through values, never through
/// band or validity masks.
struct TermSets {
    std::vector<std::size_t> floor_set;    // fawn band, label floor, normal valid
    std::vector<std::size_t> wall_set;     // fawn band, label walls, normal valid
    std::vector<std::size_t> normal_set;   // fawn band, valid in pred and gt
    std::vector<std::size_t> eikonal_set;  // eikonal band
};

TermSets collect_term_sets(const TsdfVolume& vol, const SemanticVolume* sem,
                           const NormalField* gt_normals, const BandWidths& bands,
                           const NormalOptions& opts = {});

// --- individual terms over an explicit band (ascending voxel indices) ---

/// Mean horizontal-projection length of floor normals, 0 on an empty set.
double loss_floor(const NormalField& normals, const SemanticVolume& sem,
                  std::span<const std::size_t> band);

/// Mean |n_z| of wall normals, 0 on an empty set.
double loss_walls(const NormalField& normals, const SemanticVolume& sem,
                  std::span<const std::size_t> band);

struct FawnLoss {
    double floor = 0.0;
    double walls = 0.0;
    double sum = 0.0;
};
FawnLoss loss_fawn(const NormalField& normals, const SemanticVolume& sem,
                   std::span<const std::size_t> band);

struct NormalSupLoss {
    double cosine = 0.0;
    double euclid = 0.0;
};
/// Mean (1 - <pred, gt>) and mean ||pred - gt|| over voxels valid in both.
NormalSupLoss loss_normal_supervised(const NormalField& pred, const NormalField& gt,
                                     std::span<const std::size_t> band);

/// Mean (||grad|| - 1)^2 over valid band voxels.
double loss_eikonal(const VectorField& grad, std::span<const std::size_t> band);

/// Weighted mean squared difference against the observed volume; weights
/// come from obs (absent = 1 everywhere).
double loss_data(const TsdfVolume& vol, const TsdfVolume& obs);

// --- composed objective ---

LossBreakdown total_loss(const TsdfVolume& vol, const TsdfVolume& obs, const SemanticVolume* sem,
                         const NormalField* gt_normals, const LossWeights& weights,
                         const BandWidths& bands, const NormalOptions& opts = {});

/// Same objective over caller-frozen term sets (used by the optimizer and
/// by finite-difference checks, which must not re-derive membership).
LossBreakdown total_loss(const TsdfVolume& vol, const TsdfVolume& obs, const SemanticVolume* sem,
                         const NormalField* gt_normals, const LossWeights& weights,
                         const TermSets& sets, const NormalOptions& opts = {});

/// Exact d(total)/d(f_i) through the central-difference stencil and the
/// normalization Jacobian, with membership frozen.
std::vector<double> grad_total(const TsdfVolume& vol, const TsdfVolume& obs,
                               const SemanticVolume* sem, const NormalField* gt_normals,
                               const LossWeights& weights, const BandWidths& bands,
                               const NormalOptions& opts = {});

std::vector<double> grad_total(const TsdfVolume& vol, const TsdfVolume& obs,
                               const SemanticVolume* sem, const NormalField* gt_normals,
                               const LossWeights& weights, const TermSets& sets,
                               const NormalOptions& opts = {});

}  // namespace fawn
