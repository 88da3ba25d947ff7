#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "fawn/volume.hpp"

namespace fawn {

/// Per-voxel 3-vectors with a validity mask. Invalid entries hold (0,0,0).
struct VectorField {
    GridSpec spec;
    std::vector<Eigen::Vector3d> vectors;
    std::vector<std::uint8_t> valid;

    bool is_valid(std::size_t idx) const { return valid[idx] != 0; }
};

using NormalField = VectorField;

/// Central-difference gradient at an interior voxel, component k equal to
/// (f[+e_k] - f[-e_k]) / (2h). The same arithmetic backs gradient_central
/// and the lazy per-voxel path in the losses, so the two agree bitwise.
inline Eigen::Vector3d central_gradient_at(const TsdfVolume& vol, int i, int j, int k) {
    const GridSpec& s = vol.spec();
    const double inv2h = 1.0 / (2.0 * s.voxel_size);
    return {(vol.value(i + 1, j, k) - vol.value(i - 1, j, k)) * inv2h,
            (vol.value(i, j + 1, k) - vol.value(i, j - 1, k)) * inv2h,
            (vol.value(i, j, k + 1) - vol.value(i, j, k - 1)) * inv2h};
}

/// g / max(||g||, eps); second return is false when ||g|| < eps.
inline std::pair<Eigen::Vector3d, bool> unit_normal(const Eigen::Vector3d& g, double eps) {
    double n = g.norm();
    if (n < eps) return {Eigen::Vector3d::Zero(), false};
    return {g / n, true};
}

/// First-order gradients of the TSDF on interior voxels, boundary invalid.
VectorField gradient_central(const TsdfVolume& vol);

/// Unit normals from a gradient field; entries with ||g|| < eps go invalid.
NormalField normalize_field(const VectorField& g, double eps = 1e-8);

/// Debug dump (FVEC): volume header + three scalar payloads; invalid entries
/// round-trip as NaN components.
void save_vector_field(const VectorField& field, const std::filesystem::path& path);
VectorField load_vector_field(const std::filesystem::path& path);

}  // namespace fawn
