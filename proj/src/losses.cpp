#include "fawn/losses.hpp"

#include <cmath>

#include "fawn/detail/parallel.hpp"
#include "fawn/detail/sum.hpp"

namespace fawn {

namespace {

void require_same_spec(const GridSpec& a, const GridSpec& b, const char* what) {
    if (!(a == b)) throw SpecMismatchError(std::string("grid spec mismatch: ") + what);
}

// per-point contributions; the brute-force test oracles restate these
// formulas independently and must agree bitwise
double floor_contrib(const Eigen::Vector3d& n) {
    return std::sqrt(n.x() * n.x() + n.y() * n.y());
}
double wall_contrib(const Eigen::Vector3d& n) { return std::abs(n.z()); }
double eikonal_contrib(const Eigen::Vector3d& g) {
    double m = g.norm();
    return (m - 1.0) * (m - 1.0);
}

// normal as the losses see it at one voxel of `vol`; second value false
// when the voxel must be skipped (eps-degenerate gradient)
std::pair<Eigen::Vector3d, bool> loss_normal_at(const TsdfVolume& vol, std::size_t idx,
                                                const NormalOptions& opts) {
    Eigen::Vector3i c = vol.spec().coords(idx);
    Eigen::Vector3d g = central_gradient_at(vol, c.x(), c.y(), c.z());
    if (opts.raw_gradient) return {g, true};
    return unit_normal(g, opts.eps);
}

double mean_or_zero(const detail::KahanSum& s, std::size_t n) {
    return n == 0 ? 0.0 : s.value() / static_cast<double>(n);
}

double compose_total(const LossBreakdown& b, const LossWeights& w) {
    return w.lambda_data * b.data + w.lambda_norm * (b.norm_cosine + b.norm_euclid + b.eikonal) +
           w.lambda_fawn * b.fawn;
}

struct DataLoss {
    double value = 0.0;
    double weight_sum = 0.0;
    std::size_t count = 0;
};

DataLoss data_loss(const TsdfVolume& vol, const TsdfVolume& obs) {
    require_same_spec(vol.spec(), obs.spec(), "vol vs obs");
    const std::size_t n = vol.spec().voxel_count();
    std::span<const double> f = vol.values();
    std::span<const double> o = obs.values();
    std::vector<double> contrib(n);
    detail::parallel_for(0, static_cast<std::int64_t>(n), [&](std::int64_t i) {
        double d = f[i] - o[i];
        contrib[i] = obs.weight(i) * d * d;
    });
    DataLoss out;
    detail::KahanSum sum, wsum;
    for (std::size_t i = 0; i < n; ++i) {
        double w = obs.weight(i);
        sum.add(contrib[i]);
        wsum.add(w);
        if (w > 0.0) ++out.count;
    }
    out.weight_sum = wsum.value();
    out.value = out.weight_sum > 0.0 ? sum.value() / out.weight_sum : 0.0;
    if (out.weight_sum <= 0.0) out.count = 0;
    return out;
}

}  // namespace

void LossWeights::validate() const {
    for (double l : {lambda_fawn, lambda_norm, lambda_data}) {
        if (!(l >= 0.0) || !std::isfinite(l)) {
            throw InputError("LossWeights: weights must be finite and non-negative");
        }
    }
}

TermSets collect_term_sets(const TsdfVolume& vol, const SemanticVolume* sem,
                           const NormalField* gt_normals, const BandWidths& bands,
                           const NormalOptions& opts) {
    if (sem) require_same_spec(vol.spec(), sem->spec(), "vol vs semantics");
    if (gt_normals) require_same_spec(vol.spec(), gt_normals->spec, "vol vs gt normals");
    if (!(bands.fawn > 0.0) || !(bands.eikonal > 0.0)) {
        throw InputError("collect_term_sets: band widths must be positive");
    }

    const GridSpec& s = vol.spec();
    std::span<const double> f = vol.values();
    TermSets sets;
    const double wide = std::max(bands.fawn, bands.eikonal);
    for (int k = 1; k < s.dims.z() - 1; ++k) {
        for (int j = 1; j < s.dims.y() - 1; ++j) {
            std::size_t row = s.index(0, j, k);
            for (int i = 1; i < s.dims.x() - 1; ++i) {
                std::size_t idx = row + i;
                double a = std::abs(f[idx]);
                if (a >= wide) continue;
                if (a < bands.eikonal) sets.eikonal_set.push_back(idx);
                if (a >= bands.fawn) continue;
                bool need_label = sem && (sem->label(idx) == SemLabel::kFloor ||
                                          sem->label(idx) == SemLabel::kWalls);
                bool need_gt = gt_normals && gt_normals->valid[idx];
                if (!need_label && !need_gt) continue;
                auto [n, ok] = loss_normal_at(vol, idx, opts);
                (void)n;
                if (!ok) continue;
                if (need_label) {
                    if (sem->label(idx) == SemLabel::kFloor) {
                        sets.floor_set.push_back(idx);
                    } else {
                        sets.wall_set.push_back(idx);
                    }
                }
                if (need_gt) sets.normal_set.push_back(idx);
            }
        }
    }
    return sets;
}

double loss_floor(const NormalField& normals, const SemanticVolume& sem,
                  std::span<const std::size_t> band) {
    require_same_spec(normals.spec, sem.spec(), "normals vs semantics");
    detail::KahanSum sum;
    std::size_t count = 0;
    for (std::size_t idx : band) {
        if (sem.label(idx) != SemLabel::kFloor || !normals.valid[idx]) continue;
        sum.add(floor_contrib(normals.vectors[idx]));
        ++count;
    }
    return mean_or_zero(sum, count);
}

double loss_walls(const NormalField& normals, const SemanticVolume& sem,
                  std::span<const std::size_t> band) {
    require_same_spec(normals.spec, sem.spec(), "normals vs semantics");
    detail::KahanSum sum;
    std::size_t count = 0;
    for (std::size_t idx : band) {
        if (sem.label(idx) != SemLabel::kWalls || !normals.valid[idx]) continue;
        sum.add(wall_contrib(normals.vectors[idx]));
        ++count;
    }
    return mean_or_zero(sum, count);
}

FawnLoss loss_fawn(const NormalField& normals, const SemanticVolume& sem,
                   std::span<const std::size_t> band) {
    FawnLoss out;
    out.floor = loss_floor(normals, sem, band);
    out.walls = loss_walls(normals, sem, band);
    out.sum = out.walls + out.floor;
    return out;
}

NormalSupLoss loss_normal_supervised(const NormalField& pred, const NormalField& gt,
                                     std::span<const std::size_t> band) {
    require_same_spec(pred.spec, gt.spec, "pred vs gt normals");
    detail::KahanSum cos_sum, euc_sum;
    std::size_t count = 0;
    for (std::size_t idx : band) {
        if (!pred.valid[idx] || !gt.valid[idx]) continue;
        cos_sum.add(1.0 - pred.vectors[idx].dot(gt.vectors[idx]));
        euc_sum.add((pred.vectors[idx] - gt.vectors[idx]).norm());
        ++count;
    }
    return {mean_or_zero(cos_sum, count), mean_or_zero(euc_sum, count)};
}

double loss_eikonal(const VectorField& grad, std::span<const std::size_t> band) {
    detail::KahanSum sum;
    std::size_t count = 0;
    for (std::size_t idx : band) {
        if (!grad.valid[idx]) continue;
        sum.add(eikonal_contrib(grad.vectors[idx]));
        ++count;
    }
    return mean_or_zero(sum, count);
}

double loss_data(const TsdfVolume& vol, const TsdfVolume& obs) {
    return data_loss(vol, obs).value;
}

LossBreakdown total_loss(const TsdfVolume& vol, const TsdfVolume& obs, const SemanticVolume* sem,
                         const NormalField* gt_normals, const LossWeights& weights,
                         const BandWidths& bands, const NormalOptions& opts) {
    return total_loss(vol, obs, sem, gt_normals, weights,
                      collect_term_sets(vol, sem, gt_normals, bands, opts), opts);
}

LossBreakdown total_loss(const TsdfVolume& vol, const TsdfVolume& obs, const SemanticVolume* sem,
                         const NormalField* gt_normals, const LossWeights& weights,
                         const TermSets& sets, const NormalOptions& opts) {
    weights.validate();
    if (gt_normals) require_same_spec(vol.spec(), gt_normals->spec, "vol vs gt normals");
    if (sem) require_same_spec(vol.spec(), sem->spec(), "vol vs semantics");

    LossBreakdown b;
    {
        detail::KahanSum sum;
        for (std::size_t idx : sets.floor_set) {
            sum.add(floor_contrib(loss_normal_at(vol, idx, opts).first));
        }
        b.counts.floor = sets.floor_set.size();
        b.floor = mean_or_zero(sum, b.counts.floor);
    }
    {
        detail::KahanSum sum;
        for (std::size_t idx : sets.wall_set) {
            sum.add(wall_contrib(loss_normal_at(vol, idx, opts).first));
        }
        b.counts.walls = sets.wall_set.size();
        b.walls = mean_or_zero(sum, b.counts.walls);
    }
    b.fawn = b.walls + b.floor;
    if (gt_normals) {
        detail::KahanSum cos_sum, euc_sum;
        for (std::size_t idx : sets.normal_set) {
            Eigen::Vector3d n = loss_normal_at(vol, idx, opts).first;
            cos_sum.add(1.0 - n.dot(gt_normals->vectors[idx]));
            euc_sum.add((n - gt_normals->vectors[idx]).norm());
        }
        b.counts.normal = sets.normal_set.size();
        b.norm_cosine = mean_or_zero(cos_sum, b.counts.normal);
        b.norm_euclid = mean_or_zero(euc_sum, b.counts.normal);
    }
    {
        detail::KahanSum sum;
        for (std::size_t idx : sets.eikonal_set) {
            Eigen::Vector3i c = vol.spec().coords(idx);
            sum.add(eikonal_contrib(central_gradient_at(vol, c.x(), c.y(), c.z())));
        }
        b.counts.eikonal = sets.eikonal_set.size();
        b.eikonal = mean_or_zero(sum, b.counts.eikonal);
    }
    DataLoss d = data_loss(vol, obs);
    b.data = d.value;
    b.counts.data = d.count;
    b.total = compose_total(b, weights);
    return b;
}

std::vector<double> grad_total(const TsdfVolume& vol, const TsdfVolume& obs,
                               const SemanticVolume* sem, const NormalField* gt_normals,
                               const LossWeights& weights, const BandWidths& bands,
                               const NormalOptions& opts) {
    return grad_total(vol, obs, sem, gt_normals, weights,
                      collect_term_sets(vol, sem, gt_normals, bands, opts), opts);
}

std::vector<double> grad_total(const TsdfVolume& vol, const TsdfVolume& obs,
                               const SemanticVolume* sem, const NormalField* gt_normals,
                               const LossWeights& weights, const TermSets& sets,
                               const NormalOptions& opts) {
    weights.validate();
    require_same_spec(vol.spec(), obs.spec(), "vol vs obs");
    if (gt_normals) require_same_spec(vol.spec(), gt_normals->spec, "vol vs gt normals");
    if (sem) require_same_spec(vol.spec(), sem->spec(), "vol vs semantics");

    const GridSpec& s = vol.spec();
    const std::size_t n = s.voxel_count();
    std::vector<double> grad(n, 0.0);

    // observation term: 2 w_i (f_i - o_i) / sum(w)
    if (weights.lambda_data > 0.0) {
        detail::KahanSum wsum;
        for (std::size_t i = 0; i < n; ++i) wsum.add(obs.weight(i));
        double sw = wsum.value();
        if (sw > 0.0) {
            double scale = weights.lambda_data * 2.0 / sw;
            std::span<const double> f = vol.values();
            std::span<const double> o = obs.values();
            detail::parallel_for(0, static_cast<std::int64_t>(n), [&](std::int64_t i) {
                grad[i] = scale * obs.weight(i) * (f[i] - o[i]);
            });
        }
    }

    // terms acting through the gradient stencil accumulate d(loss)/d(g_p)
    // into a dense field, scattered to voxels afterwards
    std::vector<Eigen::Vector3d> dg;
    auto ensure_dg = [&]() {
        if (dg.empty()) dg.assign(n, Eigen::Vector3d::Zero());
    };

    // pullback through n = g/||g||: J^T u = (u - n (n . u)) / ||g||
    auto through_normalization = [&](const Eigen::Vector3d& g, const Eigen::Vector3d& n,
                                     const Eigen::Vector3d& u) -> Eigen::Vector3d {
        if (opts.raw_gradient) return u;
        return (u - n * n.dot(u)) / g.norm();
    };

    if (weights.lambda_fawn > 0.0 && !sets.floor_set.empty()) {
        ensure_dg();
        double scale = weights.lambda_fawn / static_cast<double>(sets.floor_set.size());
        detail::parallel_for(0, static_cast<std::int64_t>(sets.floor_set.size()),
                             [&](std::int64_t si) {
                                 std::size_t idx = sets.floor_set[si];
                                 Eigen::Vector3i c = s.coords(idx);
                                 Eigen::Vector3d g = central_gradient_at(vol, c.x(), c.y(), c.z());
                                 auto [nrm, ok] = opts.raw_gradient
                                                      ? std::pair{g, true}
                                                      : unit_normal(g, opts.eps);
                                 if (!ok) return;
                                 double rho = floor_contrib(nrm);
                                 if (rho <= 0.0) return;
                                 Eigen::Vector3d u(nrm.x() / rho, nrm.y() / rho, 0.0);
                                 dg[idx] += scale * through_normalization(g, nrm, u);
                             });
    }
    if (weights.lambda_fawn > 0.0 && !sets.wall_set.empty()) {
        ensure_dg();
        double scale = weights.lambda_fawn / static_cast<double>(sets.wall_set.size());
        detail::parallel_for(0, static_cast<std::int64_t>(sets.wall_set.size()),
                             [&](std::int64_t si) {
                                 std::size_t idx = sets.wall_set[si];
                                 Eigen::Vector3i c = s.coords(idx);
                                 Eigen::Vector3d g = central_gradient_at(vol, c.x(), c.y(), c.z());
                                 auto [nrm, ok] = opts.raw_gradient
                                                      ? std::pair{g, true}
                                                      : unit_normal(g, opts.eps);
                                 if (!ok) return;
                                 if (nrm.z() == 0.0) return;
                                 Eigen::Vector3d u(0.0, 0.0, nrm.z() > 0.0 ? 1.0 : -1.0);
                                 dg[idx] += scale * through_normalization(g, nrm, u);
                             });
    }
    if (weights.lambda_norm > 0.0 && gt_normals && !sets.normal_set.empty()) {
        ensure_dg();
        double scale = weights.lambda_norm / static_cast<double>(sets.normal_set.size());
        detail::parallel_for(
            0, static_cast<std::int64_t>(sets.normal_set.size()), [&](std::int64_t si) {
                std::size_t idx = sets.normal_set[si];
                Eigen::Vector3i c = s.coords(idx);
                Eigen::Vector3d g = central_gradient_at(vol, c.x(), c.y(), c.z());
                auto [nrm, ok] =
                    opts.raw_gradient ? std::pair{g, true} : unit_normal(g, opts.eps);
                if (!ok) return;
                const Eigen::Vector3d& gt = gt_normals->vectors[idx];
                Eigen::Vector3d u = -gt;  // d(1 - n.gt)/dn
                Eigen::Vector3d diff = nrm - gt;
                double d = diff.norm();
                if (d > 0.0) u += diff / d;  // d||n - gt||/dn
                dg[idx] += scale * through_normalization(g, nrm, u);
            });
    }
    if (weights.lambda_norm > 0.0 && !sets.eikonal_set.empty()) {
        ensure_dg();
        double scale = weights.lambda_norm / static_cast<double>(sets.eikonal_set.size());
        detail::parallel_for(0, static_cast<std::int64_t>(sets.eikonal_set.size()),
                             [&](std::int64_t si) {
                                 std::size_t idx = sets.eikonal_set[si];
                                 Eigen::Vector3i c = s.coords(idx);
                                 Eigen::Vector3d g = central_gradient_at(vol, c.x(), c.y(), c.z());
                                 double m = g.norm();
                                 if (m <= 0.0) return;
                                 dg[idx] += scale * (2.0 * (m - 1.0) / m) * g;
                             });
    }

    if (!dg.empty()) {
        // transpose of the stencil, applied as a gather so writes stay private
        const double inv2h = 1.0 / (2.0 * s.voxel_size);
        const int nx = s.dims.x(), ny = s.dims.y(), nz = s.dims.z();
        detail::parallel_for(0, nz, [&](std::int64_t k) {
            for (int j = 0; j < ny; ++j) {
                for (int i = 0; i < nx; ++i) {
                    std::size_t q = s.index(i, j, static_cast<int>(k));
                    double acc = 0.0;
                    if (i >= 1) acc += dg[q - 1].x();
                    if (i + 1 < nx) acc -= dg[q + 1].x();
                    if (j >= 1) acc += dg[q - nx].y();
                    if (j + 1 < ny) acc -= dg[q + nx].y();
                    std::size_t plane = static_cast<std::size_t>(nx) * ny;
                    if (k >= 1) acc += dg[q - plane].z();
                    if (k + 1 < nz) acc -= dg[q + plane].z();
                    grad[q] += acc * inv2h;
                }
            }
        });
    }
    return grad;
}

}  // namespace fawn
