#include "fawn/volume.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace fawn {

void GridSpec::validate() const {
    if (dims.x() < 2 || dims.y() < 2 || dims.z() < 2) {
        throw InputError("GridSpec: dims must be >= 2 per axis");
    }
    if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
        throw InputError("GridSpec: voxel_size must be positive");
    }
    if (!(truncation >= voxel_size) || !std::isfinite(truncation)) {
        throw InputError("GridSpec: truncation must be >= voxel_size");
    }
    if (!origin.allFinite()) {
        throw InputError("GridSpec: origin must be finite");
    }
}

TsdfVolume::TsdfVolume(GridSpec spec, std::vector<double> values, std::vector<double> weights)
    : spec_(spec), values_(std::move(values)), weights_(std::move(weights)) {
    spec_.validate();
    if (values_.size() != spec_.voxel_count()) {
        throw InputError("TsdfVolume: value count does not match grid dims");
    }
    if (!weights_.empty() && weights_.size() != spec_.voxel_count()) {
        throw InputError("TsdfVolume: weight count does not match grid dims");
    }
}

TsdfVolume TsdfVolume::filled(const GridSpec& spec, std::optional<double> fill) {
    spec.validate();
    double v = fill.value_or(spec.truncation);
    return TsdfVolume(spec, std::vector<double>(spec.voxel_count(), v));
}

void TsdfVolume::set_weights(std::vector<double> w) {
    if (!w.empty() && w.size() != spec_.voxel_count()) {
        throw InputError("TsdfVolume: weight count does not match grid dims");
    }
    weights_ = std::move(w);
}

SemanticVolume::SemanticVolume(GridSpec spec, std::vector<std::uint8_t> labels)
    : spec_(spec), labels_(std::move(labels)) {
    spec_.validate();
    if (labels_.size() != spec_.voxel_count()) {
        throw InputError("SemanticVolume: label count does not match grid dims");
    }
    for (std::uint8_t l : labels_) {
        if (l > 2 && l != 255) {
            throw InputError("SemanticVolume: label values must be one of {0,1,2,255}");
        }
    }
}

SemanticVolume SemanticVolume::filled(const GridSpec& spec, SemLabel fill) {
    spec.validate();
    return SemanticVolume(
        spec, std::vector<std::uint8_t>(spec.voxel_count(), static_cast<std::uint8_t>(fill)));
}

std::optional<double> sample_trilinear(const TsdfVolume& vol, const Eigen::Vector3d& p) {
    const GridSpec& s = vol.spec();
    Eigen::Vector3d c = world_to_voxel(s, p);
    for (int a = 0; a < 3; ++a) {
        if (!(c[a] >= 0.0) || !(c[a] <= static_cast<double>(s.dims[a] - 1))) {
            return std::nullopt;
        }
    }
    // anchor the support cell so that exact upper-boundary centers stay valid
    int i0 = std::min(static_cast<int>(std::floor(c.x())), s.dims.x() - 2);
    int j0 = std::min(static_cast<int>(std::floor(c.y())), s.dims.y() - 2);
    int k0 = std::min(static_cast<int>(std::floor(c.z())), s.dims.z() - 2);
    double fx = c.x() - i0, fy = c.y() - j0, fz = c.z() - k0;

    auto v = [&](int di, int dj, int dk) { return vol.value(i0 + di, j0 + dj, k0 + dk); };
    double c00 = v(0, 0, 0) * (1 - fx) + v(1, 0, 0) * fx;
    double c10 = v(0, 1, 0) * (1 - fx) + v(1, 1, 0) * fx;
    double c01 = v(0, 0, 1) * (1 - fx) + v(1, 0, 1) * fx;
    double c11 = v(0, 1, 1) * (1 - fx) + v(1, 1, 1) * fx;
    double c0 = c00 * (1 - fy) + c10 * fy;
    double c1 = c01 * (1 - fy) + c11 * fy;
    return c0 * (1 - fz) + c1 * fz;
}

std::vector<std::size_t> narrow_band(const TsdfVolume& vol, double band) {
    if (!(band > 0.0)) throw InputError("narrow_band: band must be positive");
    const GridSpec& s = vol.spec();
    std::vector<std::size_t> out;
    std::span<const double> f = vol.values();
    for (int k = 1; k < s.dims.z() - 1; ++k) {
        for (int j = 1; j < s.dims.y() - 1; ++j) {
            std::size_t row = s.index(0, j, k);
            for (int i = 1; i < s.dims.x() - 1; ++i) {
                if (std::abs(f[row + i]) < band) out.push_back(row + i);
            }
        }
    }
    return out;
}

// --- FVOL / FSEM serialization ---

namespace {

constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) buf.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

void put_f32(std::string& buf, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
}

void put_f64(std::string& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int b = 0; b < 8; ++b) buf.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

class Reader {
public:
    Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open " + path.string());
    }
    std::uint32_t u32() {
        unsigned char b[4];
        read(b, 4, "header");
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }
    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        unsigned char b[8];
        read(b, 8, "header");
        std::uint64_t bits = 0;
        for (int i = 7; i >= 0; --i) bits = (bits << 8) | b[i];
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    void magic(const char expect[4]) {
        char m[4];
        read(reinterpret_cast<unsigned char*>(m), 4, "magic");
        if (std::memcmp(m, expect, 4) != 0) {
            throw IoError("malformed header in " + path_.string() + ": bad magic");
        }
    }
    void read(unsigned char* dst, std::size_t n, const char* what) {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw IoError(std::string("truncated ") + what + " in " + path_.string());
        }
    }
    // remaining bytes after the header
    std::size_t remaining() {
        auto pos = in_.tellg();
        in_.seekg(0, std::ios::end);
        auto end = in_.tellg();
        in_.seekg(pos);
        return static_cast<std::size_t>(end - pos);
    }

private:
    std::filesystem::path path_;
    std::ifstream in_;
};

void write_file(const std::filesystem::path& path, const std::string& buf) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

void put_header(std::string& buf, const char magic[4], const GridSpec& s) {
    buf.append(magic, 4);
    put_u32(buf, kFormatVersion);
    put_u32(buf, static_cast<std::uint32_t>(s.dims.x()));
    put_u32(buf, static_cast<std::uint32_t>(s.dims.y()));
    put_u32(buf, static_cast<std::uint32_t>(s.dims.z()));
    put_f64(buf, s.origin.x());
    put_f64(buf, s.origin.y());
    put_f64(buf, s.origin.z());
    put_f64(buf, s.voxel_size);
    put_f64(buf, s.truncation);
}

GridSpec read_header(Reader& r, const char magic[4]) {
    r.magic(magic);
    std::uint32_t version = r.u32();
    if (version != kFormatVersion) {
        throw IoError("malformed header: unsupported version " + std::to_string(version));
    }
    GridSpec s;
    s.dims.x() = static_cast<int>(r.u32());
    s.dims.y() = static_cast<int>(r.u32());
    s.dims.z() = static_cast<int>(r.u32());
    s.origin.x() = r.f64();
    s.origin.y() = r.f64();
    s.origin.z() = r.f64();
    s.voxel_size = r.f64();
    s.truncation = r.f64();
    try {
        s.validate();
    } catch (const InputError& e) {
        throw IoError(std::string("malformed header: ") + e.what());
    }
    return s;
}

}  // namespace

void save_volume(const TsdfVolume& vol, const std::filesystem::path& path) {
    std::string buf;
    const std::size_t n = vol.spec().voxel_count();
    buf.reserve(48 + 4 * n * (vol.has_weights() ? 2 : 1));
    put_header(buf, "FVOL", vol.spec());
    for (double v : vol.values()) put_f32(buf, static_cast<float>(v));
    // optional second payload of the same length carries weights
    for (double w : vol.weights()) put_f32(buf, static_cast<float>(w));
    write_file(path, buf);
}

TsdfVolume load_volume(const std::filesystem::path& path) {
    Reader r(path);
    GridSpec s = read_header(r, "FVOL");
    const std::size_t n = s.voxel_count();
    std::size_t rest = r.remaining();
    bool with_weights;
    if (rest == 4 * n) {
        with_weights = false;
    } else if (rest == 8 * n) {
        with_weights = true;
    } else {
        throw IoError("payload size mismatch in " + path.string() + ": expected " +
                      std::to_string(4 * n) + " or " + std::to_string(8 * n) + " bytes, found " +
                      std::to_string(rest));
    }
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = static_cast<double>(r.f32());
    std::vector<double> weights;
    if (with_weights) {
        weights.resize(n);
        for (std::size_t i = 0; i < n; ++i) weights[i] = static_cast<double>(r.f32());
    }
    return TsdfVolume(s, std::move(values), std::move(weights));
}

void save_labels(const SemanticVolume& sem, const std::filesystem::path& path) {
    std::string buf;
    const std::size_t n = sem.spec().voxel_count();
    buf.reserve(48 + n);
    put_header(buf, "FSEM", sem.spec());
    buf.append(reinterpret_cast<const char*>(sem.labels().data()), n);
    write_file(path, buf);
}

SemanticVolume load_labels(const std::filesystem::path& path) {
    Reader r(path);
    GridSpec s = read_header(r, "FSEM");
    const std::size_t n = s.voxel_count();
    if (r.remaining() != n) {
        throw IoError("payload size mismatch in " + path.string() + ": expected " +
                      std::to_string(n) + " bytes, found " + std::to_string(r.remaining()));
    }
    std::vector<std::uint8_t> labels(n);
    r.read(labels.data(), n, "payload");
    try {
        return SemanticVolume(s, std::move(labels));
    } catch (const InputError& e) {
        throw IoError(std::string("malformed payload: ") + e.what());
    }
}

}  // namespace fawn
