#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "fawn/surface.hpp"

namespace fawn {

namespace {

struct Property {
    std::string name;
    int size = 0;       // bytes per scalar
    bool is_float = false;
    bool is_list = false;
    int count_size = 0;  // list only
    int elem_size = 0;   // list only
};

int type_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
        t == "float32") {
        return 4;
    }
    if (t == "double" || t == "float64") return 8;
    return 0;
}

bool type_float(const std::string& t) {
    return t == "float" || t == "float32" || t == "double" || t == "float64";
}

double read_scalar(std::istream& in, int size, bool is_float) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), size);
    std::uint64_t bits = 0;
    for (int i = size - 1; i >= 0; --i) bits = (bits << 8) | b[i];
    if (is_float && size == 4) {
        float f;
        std::uint32_t u = static_cast<std::uint32_t>(bits);
        std::memcpy(&f, &u, 4);
        return f;
    }
    if (is_float && size == 8) {
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }
    return static_cast<double>(bits);
}

}  // namespace

void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path, bool ascii) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");

    out << "ply\n"
        << (ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n")
        << "element vertex " << mesh.vertices.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n"
        << "element face " << mesh.triangles.size() << "\n"
        << "property list uchar int vertex_indices\n"
        << "end_header\n";

    if (ascii) {
        std::ostringstream ss;
        ss.precision(std::numeric_limits<float>::max_digits10);
        for (const auto& v : mesh.vertices) {
            ss << static_cast<float>(v.x()) << ' ' << static_cast<float>(v.y()) << ' '
               << static_cast<float>(v.z()) << '\n';
        }
        for (const auto& t : mesh.triangles) {
            ss << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
        }
        out << ss.str();
    } else {
        std::string buf;
        buf.reserve(mesh.vertices.size() * 12 + mesh.triangles.size() * 13);
        auto put_u32 = [&](std::uint32_t u) {
            for (int b = 0; b < 4; ++b) buf.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
        };
        for (const auto& v : mesh.vertices) {
            for (int c = 0; c < 3; ++c) {
                float f = static_cast<float>(v[c]);
                std::uint32_t u;
                std::memcpy(&u, &f, 4);
                put_u32(u);
            }
        }
        for (const auto& t : mesh.triangles) {
            buf.push_back(3);
            for (int c = 0; c < 3; ++c) put_u32(static_cast<std::uint32_t>(t[c]));
        }
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    if (!out) throw IoError("write failed for " + path.string());
}

TriangleMesh load_mesh(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    auto fail = [&](const std::string& what) -> void {
        throw IoError("PLY error in " + path.string() + ": " + what);
    };

    std::string line;
    if (!std::getline(in, line) || (line != "ply" && line != "ply\r")) fail("missing ply magic");

    bool ascii = false;
    bool in_vertex = false, in_face = false;
    std::size_t n_vertices = 0, n_faces = 0;
    std::vector<Property> vertex_props;
    Property face_list;
    bool have_format = false, have_face_list = false;

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "comment" || tok.empty()) continue;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "ascii") {
                ascii = true;
            } else if (fmt == "binary_little_endian") {
                ascii = false;
            } else {
                fail("unsupported format " + fmt);
            }
            have_format = true;
        } else if (tok == "element") {
            std::string name;
            std::size_t count;
            ls >> name >> count;
            in_vertex = name == "vertex";
            in_face = name == "face";
            if (in_vertex) n_vertices = count;
            if (in_face) n_faces = count;
        } else if (tok == "property") {
            std::string type;
            ls >> type;
            Property p;
            if (type == "list") {
                std::string ctype, etype;
                ls >> ctype >> etype >> p.name;
                p.is_list = true;
                p.count_size = type_size(ctype);
                p.elem_size = type_size(etype);
                if (p.count_size == 0 || p.elem_size == 0 || type_float(etype)) {
                    fail("unsupported list property types");
                }
            } else {
                ls >> p.name;
                p.size = type_size(type);
                p.is_float = type_float(type);
                if (p.size == 0) fail("unsupported property type " + type);
            }
            if (in_vertex) {
                if (p.is_list) fail("list-valued vertex properties are not supported");
                vertex_props.push_back(p);
            } else if (in_face) {
                if (p.is_list && (p.name == "vertex_indices" || p.name == "vertex_index")) {
                    face_list = p;
                    have_face_list = true;
                } else if (p.is_list) {
                    // unnamed extra lists would need skipping logic; reject
                    fail("unsupported face list property " + p.name);
                } else {
                    fail("unsupported face property " + p.name);
                }
            }
        } else if (tok == "end_header") {
            break;
        }
    }
    if (!have_format) fail("missing format line");
    if (n_faces > 0 && !have_face_list) fail("missing face list property");

    int ix = -1, iy = -1, iz = -1;
    for (std::size_t p = 0; p < vertex_props.size(); ++p) {
        if (vertex_props[p].name == "x") ix = static_cast<int>(p);
        if (vertex_props[p].name == "y") iy = static_cast<int>(p);
        if (vertex_props[p].name == "z") iz = static_cast<int>(p);
    }
    if (ix < 0 || iy < 0 || iz < 0) fail("vertex element lacks x/y/z properties");

    TriangleMesh mesh;
    mesh.vertices.reserve(n_vertices);
    mesh.triangles.reserve(n_faces);

    if (ascii) {
        for (std::size_t v = 0; v < n_vertices; ++v) {
            if (!std::getline(in, line)) fail("truncated vertex data");
            std::istringstream ls(line);
            Eigen::Vector3d pt = Eigen::Vector3d::Zero();
            for (std::size_t p = 0; p < vertex_props.size(); ++p) {
                double val;
                if (!(ls >> val)) fail("bad vertex line");
                if (static_cast<int>(p) == ix) pt.x() = val;
                if (static_cast<int>(p) == iy) pt.y() = val;
                if (static_cast<int>(p) == iz) pt.z() = val;
            }
            mesh.vertices.push_back(pt);
        }
        for (std::size_t t = 0; t < n_faces; ++t) {
            if (!std::getline(in, line)) fail("truncated face data");
            std::istringstream ls(line);
            std::size_t count;
            if (!(ls >> count)) fail("bad face line");
            std::vector<int> idx(count);
            for (auto& i : idx) {
                if (!(ls >> i)) fail("bad face line");
            }
            // triangulate polygons as a fan
            for (std::size_t e = 1; e + 1 < count; ++e) {
                mesh.triangles.push_back({idx[0], idx[e], idx[e + 1]});
            }
        }
    } else {
        for (std::size_t v = 0; v < n_vertices; ++v) {
            Eigen::Vector3d pt = Eigen::Vector3d::Zero();
            for (std::size_t p = 0; p < vertex_props.size(); ++p) {
                double val = read_scalar(in, vertex_props[p].size, vertex_props[p].is_float);
                if (static_cast<int>(p) == ix) pt.x() = val;
                if (static_cast<int>(p) == iy) pt.y() = val;
                if (static_cast<int>(p) == iz) pt.z() = val;
            }
            if (!in) fail("truncated vertex data");
            mesh.vertices.push_back(pt);
        }
        for (std::size_t t = 0; t < n_faces; ++t) {
            auto count = static_cast<std::size_t>(
                read_scalar(in, face_list.count_size, /*is_float=*/false));
            if (!in) fail("truncated face data");
            std::vector<int> idx(count);
            for (auto& i : idx) {
                i = static_cast<int>(read_scalar(in, face_list.elem_size, /*is_float=*/false));
            }
            if (!in) fail("truncated face data");
            for (std::size_t e = 1; e + 1 < count; ++e) {
                mesh.triangles.push_back({idx[0], idx[e], idx[e + 1]});
            }
        }
    }

    for (const auto& t : mesh.triangles) {
        for (int c : t) {
            if (c < 0 || static_cast<std::size_t>(c) >= mesh.vertices.size()) {
                fail("face index out of range");
            }
        }
    }
    return mesh;
}

}  // namespace fawn
