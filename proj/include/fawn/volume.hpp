#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "fawn/errors.hpp"

namespace fawn {

/// Voxel labels stored in a SemanticVolume.
enum class SemLabel : std::uint8_t {
    kOther = 0,
    kFloor = 1,
    kWalls = 2,
    kUnknown = 255,
};

/// Placement and resolution of a dense voxel grid. Voxel (0,0,0) sits with
/// its *center* at `origin`; linear index is x-fastest.
struct GridSpec {
    Eigen::Vector3i dims{0, 0, 0};
    Eigen::Vector3d origin{0.0, 0.0, 0.0};
    double voxel_size = 0.0;  // h, meters
    double truncation = 0.0;  // tau, meters

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims.x()) * dims.y() * dims.z();
    }
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims.x()) * (static_cast<std::size_t>(j) +
                                                     static_cast<std::size_t>(dims.y()) * k);
    }
    Eigen::Vector3i coords(std::size_t idx) const {
        int i = static_cast<int>(idx % dims.x());
        int j = static_cast<int>((idx / dims.x()) % dims.y());
        int k = static_cast<int>(idx / (static_cast<std::size_t>(dims.x()) * dims.y()));
        return {i, j, k};
    }
    bool contains(int i, int j, int k) const {
        return i >= 0 && j >= 0 && k >= 0 && i < dims.x() && j < dims.y() && k < dims.z();
    }
    // all six axis neighbors in-grid
    bool interior(int i, int j, int k) const {
        return i >= 1 && j >= 1 && k >= 1 && i < dims.x() - 1 && j < dims.y() - 1 &&
               k < dims.z() - 1;
    }
    Eigen::Vector3d voxel_center(int i, int j, int k) const {
        return origin + voxel_size * Eigen::Vector3d(i, j, k);
    }

    /// Throws InputError unless dims >= 2 per axis, h > 0, tau >= h.
    void validate() const;

    bool operator==(const GridSpec& o) const {
        return dims == o.dims && origin == o.origin && voxel_size == o.voxel_size &&
               truncation == o.truncation;
    }
};

/// World point -> continuous voxel coordinates, no clamping.
inline Eigen::Vector3d world_to_voxel(const GridSpec& spec, const Eigen::Vector3d& p) {
    return (p - spec.origin) / spec.voxel_size;
}

/// Continuous voxel coordinates -> world point.
inline Eigen::Vector3d voxel_to_world(const GridSpec& spec, const Eigen::Vector3d& c) {
    return spec.origin + spec.voxel_size * c;
}

/// Dense truncated signed distance volume, values in meters, negative inside
/// solids. Weights are optional observation confidences (absent = 1 everywhere).
class TsdfVolume {
public:
    TsdfVolume() = default;
    TsdfVolume(GridSpec spec, std::vector<double> values, std::vector<double> weights = {});

    /// All values set to `fill` (default +tau), no weights.
    static TsdfVolume filled(const GridSpec& spec, std::optional<double> fill = std::nullopt);

    const GridSpec& spec() const { return spec_; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    bool has_weights() const { return !weights_.empty(); }
    std::span<const double> weights() const { return weights_; }
    std::span<double> weights() { return weights_; }

    double value(int i, int j, int k) const { return values_[spec_.index(i, j, k)]; }
    double weight(std::size_t idx) const { return weights_.empty() ? 1.0 : weights_[idx]; }

    void set_weights(std::vector<double> w);

private:
    GridSpec spec_;
    std::vector<double> values_;
    std::vector<double> weights_;
};

/// Per-voxel {other, floor, walls, unknown} labels on the same grid as the
/// paired TsdfVolume.
class SemanticVolume {
public:
    SemanticVolume() = default;
    SemanticVolume(GridSpec spec, std::vector<std::uint8_t> labels);

    static SemanticVolume filled(const GridSpec& spec, SemLabel fill = SemLabel::kUnknown);

    const GridSpec& spec() const { return spec_; }
    std::span<const std::uint8_t> labels() const { return labels_; }
    std::span<std::uint8_t> labels() { return labels_; }
    SemLabel label(std::size_t idx) const { return static_cast<SemLabel>(labels_[idx]); }

private:
    GridSpec spec_;
    std::vector<std::uint8_t> labels_;
};

/// Trilinear interpolation at world point p; nullopt when any of the eight
/// support voxels falls outside the grid.
std::optional<double> sample_trilinear(const TsdfVolume& vol, const Eigen::Vector3d& p);

/// Interior voxels with |value| < band, ascending linear index.
std::vector<std::size_t> narrow_band(const TsdfVolume& vol, double band);

// --- binary interchange (FVOL / FSEM, little-endian; see README) ---

void save_volume(const TsdfVolume& vol, const std::filesystem::path& path);
TsdfVolume load_volume(const std::filesystem::path& path);

void save_labels(const SemanticVolume& sem, const std::filesystem::path& path);
SemanticVolume load_labels(const std::filesystem::path& path);

}  // namespace fawn
