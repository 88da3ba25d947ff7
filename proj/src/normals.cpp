#include "fawn/normals.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "fawn/detail/parallel.hpp"

namespace fawn {

VectorField gradient_central(const TsdfVolume& vol) {
    const GridSpec& s = vol.spec();
    VectorField out;
    out.spec = s;
    out.vectors.assign(s.voxel_count(), Eigen::Vector3d::Zero());
    out.valid.assign(s.voxel_count(), 0);

    const int nz = s.dims.z();
    detail::parallel_for(0, nz, [&](std::int64_t k) {
        if (k < 1 || k >= s.dims.z() - 1) return;
        for (int j = 1; j < s.dims.y() - 1; ++j) {
            for (int i = 1; i < s.dims.x() - 1; ++i) {
                std::size_t idx = s.index(i, j, static_cast<int>(k));
                out.vectors[idx] = central_gradient_at(vol, i, j, static_cast<int>(k));
                out.valid[idx] = 1;
            }
        }
    });
    return out;
}

NormalField normalize_field(const VectorField& g, double eps) {
    if (!(eps > 0.0)) throw InputError("normalize_field: eps must be positive");
    NormalField out;
    out.spec = g.spec;
    out.vectors.assign(g.vectors.size(), Eigen::Vector3d::Zero());
    out.valid.assign(g.vectors.size(), 0);
    detail::parallel_for(0, static_cast<std::int64_t>(g.vectors.size()), [&](std::int64_t idx) {
        if (!g.valid[idx]) return;
        auto [n, ok] = unit_normal(g.vectors[idx], eps);
        if (ok) {
            out.vectors[idx] = n;
            out.valid[idx] = 1;
        }
    });
    return out;
}

void save_vector_field(const VectorField& field, const std::filesystem::path& path) {
    const std::size_t n = field.spec.voxel_count();
    if (field.vectors.size() != n || field.valid.size() != n) {
        throw InputError("save_vector_field: field size does not match spec");
    }
    std::string buf;
    buf.reserve(48 + 12 * n);
    buf.append("FVEC", 4);
    std::uint32_t version = 1;
    auto put_u32 = [&](std::uint32_t v) {
        for (int b = 0; b < 4; ++b) buf.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
    };
    auto put_f64 = [&](double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        for (int b = 0; b < 8; ++b) buf.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
    };
    auto put_f32 = [&](float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(bits);
    };
    put_u32(version);
    put_u32(static_cast<std::uint32_t>(field.spec.dims.x()));
    put_u32(static_cast<std::uint32_t>(field.spec.dims.y()));
    put_u32(static_cast<std::uint32_t>(field.spec.dims.z()));
    put_f64(field.spec.origin.x());
    put_f64(field.spec.origin.y());
    put_f64(field.spec.origin.z());
    put_f64(field.spec.voxel_size);
    put_f64(field.spec.truncation);
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            put_f32(field.valid[i] ? static_cast<float>(field.vectors[i][c])
                                   : std::numeric_limits<float>::quiet_NaN());
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

VectorField load_vector_field(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    auto fail = [&](const char* what) { throw IoError(std::string(what) + " in " + path.string()); };
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "FVEC", 4) != 0) fail("malformed header");
    auto get_u32 = [&]() {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        if (in.gcount() != 4) fail("truncated header");
        return static_cast<std::uint32_t>(b[0]) | (b[1] << 8) | (b[2] << 16) |
               (static_cast<std::uint32_t>(b[3]) << 24);
    };
    auto get_f64 = [&]() {
        unsigned char b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        if (in.gcount() != 8) fail("truncated header");
        std::uint64_t bits = 0;
        for (int i = 7; i >= 0; --i) bits = (bits << 8) | b[i];
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    };
    if (get_u32() != 1) fail("malformed header: unsupported version");
    GridSpec s;
    s.dims.x() = static_cast<int>(get_u32());
    s.dims.y() = static_cast<int>(get_u32());
    s.dims.z() = static_cast<int>(get_u32());
    s.origin.x() = get_f64();
    s.origin.y() = get_f64();
    s.origin.z() = get_f64();
    s.voxel_size = get_f64();
    s.truncation = get_f64();
    try {
        s.validate();
    } catch (const InputError& e) {
        throw IoError(std::string("malformed header: ") + e.what());
    }
    const std::size_t n = s.voxel_count();
    std::vector<float> comps(3 * n);
    in.read(reinterpret_cast<char*>(comps.data()), static_cast<std::streamsize>(12 * n));
    if (static_cast<std::size_t>(in.gcount()) != 12 * n) fail("payload size mismatch");
    VectorField f;
    f.spec = s;
    f.vectors.assign(n, Eigen::Vector3d::Zero());
    f.valid.assign(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::Vector3d v(comps[i], comps[n + i], comps[2 * n + i]);
        if (v.allFinite()) {
            f.vectors[i] = v;
        } else {
            f.valid[i] = 0;
        }
    }
    return f;
}

}  // namespace fawn
