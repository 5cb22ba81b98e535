#include "scv2/io_ply.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

namespace scv2 {

double TriangleMesh::area() const {
    double a = 0.0;
    for (Eigen::Index f = 0; f < faces.rows(); ++f) {
        Vector3d v0 = vertices.row(faces(f, 0));
        Vector3d v1 = vertices.row(faces(f, 1));
        Vector3d v2 = vertices.row(faces(f, 2));
        a += 0.5 * (v1 - v0).cross(v2 - v0).norm();
    }
    return a;
}

int64_t TriangleMesh::euler_characteristic() const {
    std::set<std::pair<uint32_t, uint32_t>> edges;
    for (Eigen::Index f = 0; f < faces.rows(); ++f) {
        for (int k = 0; k < 3; ++k) {
            uint32_t a = faces(f, k), b = faces(f, (k + 1) % 3);
            edges.insert({std::min(a, b), std::max(a, b)});
        }
    }
    return int64_t(vertices.rows()) - int64_t(edges.size()) + int64_t(faces.rows());
}

int64_t TriangleMesh::boundary_edge_count() const {
    std::map<std::pair<uint32_t, uint32_t>, int> count;
    for (Eigen::Index f = 0; f < faces.rows(); ++f) {
        for (int k = 0; k < 3; ++k) {
            uint32_t a = faces(f, k), b = faces(f, (k + 1) % 3);
            ++count[{std::min(a, b), std::max(a, b)}];
        }
    }
    int64_t n = 0;
    for (const auto& [e, c] : count)
        if (c != 2) ++n;
    return n;
}

namespace {

template <typename T>
void write_raw(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

struct PlyProperty {
    std::string name;
    std::string type;
    bool is_list = false;
    std::string count_type;
};

struct PlyElement {
    std::string name;
    size_t count = 0;
    std::vector<PlyProperty> props;
};

size_t type_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
        t == "float32")
        return 4;
    if (t == "double" || t == "float64") return 8;
    throw DataError("ply: unknown property type " + t);
}

double read_scalar(const char* p, const std::string& t) {
    auto as = [&]<typename T>() {
        T v;
        std::memcpy(&v, p, sizeof(T));
        return double(v);
    };
    if (t == "char" || t == "int8") return as.operator()<int8_t>();
    if (t == "uchar" || t == "uint8") return as.operator()<uint8_t>();
    if (t == "short" || t == "int16") return as.operator()<int16_t>();
    if (t == "ushort" || t == "uint16") return as.operator()<uint16_t>();
    if (t == "int" || t == "int32") return as.operator()<int32_t>();
    if (t == "uint" || t == "uint32") return as.operator()<uint32_t>();
    if (t == "float" || t == "float32") return as.operator()<float>();
    return as.operator()<double>();
}

struct PlyFile {
    std::vector<PlyElement> elements;
    bool binary = false;
    // Per element, per row, per property (lists flattened with count first).
    std::map<std::string, std::vector<std::vector<double>>> data;
};

PlyFile parse_ply(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("ply: cannot open " + path);
    std::string line;
    if (!std::getline(is, line) || line.rfind("ply", 0) != 0)
        throw DataError("ply: bad magic in " + path);

    PlyFile f;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "binary_little_endian") f.binary = true;
            else if (fmt == "ascii") f.binary = false;
            else throw DataError("ply: unsupported format " + fmt);
        } else if (tok == "element") {
            PlyElement e;
            ls >> e.name >> e.count;
            f.elements.push_back(e);
        } else if (tok == "property") {
            if (f.elements.empty()) throw DataError("ply: property before element");
            PlyProperty p;
            ls >> p.type;
            if (p.type == "list") {
                p.is_list = true;
                ls >> p.count_type >> p.type >> p.name;
            } else {
                ls >> p.name;
            }
            f.elements.back().props.push_back(p);
        } else if (tok == "end_header") {
            break;
        }
    }

    for (const auto& e : f.elements) {
        auto& rows = f.data[e.name];
        rows.reserve(e.count);
        for (size_t i = 0; i < e.count; ++i) {
            std::vector<double> row;
            for (const auto& p : e.props) {
                if (f.binary) {
                    if (p.is_list) {
                        std::vector<char> buf(type_size(p.count_type));
                        is.read(buf.data(), std::streamsize(buf.size()));
                        size_t n = size_t(read_scalar(buf.data(), p.count_type));
                        row.push_back(double(n));
                        std::vector<char> item(type_size(p.type));
                        for (size_t k = 0; k < n; ++k) {
                            is.read(item.data(), std::streamsize(item.size()));
                            row.push_back(read_scalar(item.data(), p.type));
                        }
                    } else {
                        std::vector<char> buf(type_size(p.type));
                        is.read(buf.data(), std::streamsize(buf.size()));
                        row.push_back(read_scalar(buf.data(), p.type));
                    }
                } else {
                    if (p.is_list) {
                        size_t n;
                        is >> n;
                        row.push_back(double(n));
                        for (size_t k = 0; k < n; ++k) {
                            double v;
                            is >> v;
                            row.push_back(v);
                        }
                    } else {
                        double v;
                        is >> v;
                        row.push_back(v);
                    }
                }
            }
            if (!is) throw DataError("ply: truncated data in " + path);
            rows.push_back(std::move(row));
        }
    }
    return f;
}

int prop_index(const PlyElement& e, const std::string& name) {
    for (size_t i = 0; i < e.props.size(); ++i)
        if (e.props[i].name == name) return int(i);
    return -1;
}

} // namespace

void save_ply(const std::string& path, const PointCloud& cloud) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("ply: cannot write " + path);
    os << "ply\nformat binary_little_endian 1.0\n";
    os << "element vertex " << cloud.size() << "\n";
    os << "property float x\nproperty float y\nproperty float z\n";
    if (cloud.has_normals())
        os << "property float nx\nproperty float ny\nproperty float nz\n";
    if (cloud.has_colors())
        os << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    os << "end_header\n";
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
        for (int k = 0; k < 3; ++k) write_raw(os, float(cloud.points(i, k)));
        if (cloud.has_normals())
            for (int k = 0; k < 3; ++k) write_raw(os, float(cloud.normals(i, k)));
        if (cloud.has_colors())
            for (int k = 0; k < 3; ++k) {
                double c = std::clamp(cloud.colors(i, k), 0.0, 1.0);
                write_raw(os, uint8_t(std::lround(c * 255.0)));
            }
    }
    if (!os) throw DataError("ply: write failed " + path);
}

PointCloud load_ply(const std::string& path) {
    PlyFile f = parse_ply(path);
    PointCloud cloud;
    for (const auto& e : f.elements) {
        if (e.name != "vertex") continue;
        int ix = prop_index(e, "x"), iy = prop_index(e, "y"), iz = prop_index(e, "z");
        if (ix < 0 || iy < 0 || iz < 0) throw DataError("ply: vertex missing x/y/z");
        int ir = prop_index(e, "red"), ig = prop_index(e, "green"), ib = prop_index(e, "blue");
        int inx = prop_index(e, "nx"), iny = prop_index(e, "ny"), inz = prop_index(e, "nz");
        const auto& rows = f.data.at(e.name);
        cloud.points.resize(Eigen::Index(rows.size()), 3);
        bool rgb = ir >= 0 && ig >= 0 && ib >= 0;
        bool nrm = inx >= 0 && iny >= 0 && inz >= 0;
        if (rgb) cloud.colors.resize(Eigen::Index(rows.size()), 3);
        if (nrm) cloud.normals.resize(Eigen::Index(rows.size()), 3);
        for (size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            cloud.points.row(Eigen::Index(i)) << r[size_t(ix)], r[size_t(iy)], r[size_t(iz)];
            if (rgb)
                cloud.colors.row(Eigen::Index(i)) << r[size_t(ir)] / 255.0,
                    r[size_t(ig)] / 255.0, r[size_t(ib)] / 255.0;
            if (nrm)
                cloud.normals.row(Eigen::Index(i)) << r[size_t(inx)], r[size_t(iny)],
                    r[size_t(inz)];
        }
        return cloud;
    }
    throw DataError("ply: no vertex element in " + path);
}

void save_mesh_ply(const std::string& path, const TriangleMesh& mesh) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("ply: cannot write " + path);
    bool nrm = mesh.normals.rows() == mesh.vertices.rows() && mesh.vertices.rows() > 0;
    os << "ply\nformat binary_little_endian 1.0\n";
    os << "element vertex " << mesh.vertices.rows() << "\n";
    os << "property float x\nproperty float y\nproperty float z\n";
    if (nrm) os << "property float nx\nproperty float ny\nproperty float nz\n";
    os << "element face " << mesh.faces.rows() << "\n";
    os << "property list uchar uint vertex_indices\n";
    os << "end_header\n";
    for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
        for (int k = 0; k < 3; ++k) write_raw(os, float(mesh.vertices(i, k)));
        if (nrm)
            for (int k = 0; k < 3; ++k) write_raw(os, float(mesh.normals(i, k)));
    }
    for (Eigen::Index fidx = 0; fidx < mesh.faces.rows(); ++fidx) {
        write_raw(os, uint8_t(3));
        for (int k = 0; k < 3; ++k) write_raw(os, uint32_t(mesh.faces(fidx, k)));
    }
    if (!os) throw DataError("ply: write failed " + path);
}

TriangleMesh load_mesh_ply(const std::string& path) {
    PlyFile f = parse_ply(path);
    TriangleMesh mesh;
    for (const auto& e : f.elements) {
        const auto& rows = f.data.at(e.name);
        if (e.name == "vertex") {
            int ix = prop_index(e, "x"), iy = prop_index(e, "y"), iz = prop_index(e, "z");
            if (ix < 0 || iy < 0 || iz < 0) throw DataError("ply: vertex missing x/y/z");
            int inx = prop_index(e, "nx"), iny = prop_index(e, "ny"), inz = prop_index(e, "nz");
            bool nrm = inx >= 0 && iny >= 0 && inz >= 0;
            mesh.vertices.resize(Eigen::Index(rows.size()), 3);
            if (nrm) mesh.normals.resize(Eigen::Index(rows.size()), 3);
            for (size_t i = 0; i < rows.size(); ++i) {
                const auto& r = rows[i];
                mesh.vertices.row(Eigen::Index(i)) << r[size_t(ix)], r[size_t(iy)], r[size_t(iz)];
                if (nrm)
                    mesh.normals.row(Eigen::Index(i))
                        << r[size_t(inx)], r[size_t(iny)], r[size_t(inz)];
            }
        } else if (e.name == "face") {
            mesh.faces.resize(Eigen::Index(rows.size()), 3);
            for (size_t i = 0; i < rows.size(); ++i) {
                const auto& r = rows[i];
                if (r.empty() || size_t(r[0]) != 3)
                    throw DataError("ply: only triangle faces supported");
                mesh.faces.row(Eigen::Index(i)) << uint32_t(r[1]), uint32_t(r[2]), uint32_t(r[3]);
            }
        }
    }
    if (mesh.vertices.rows() == 0) throw DataError("ply: no vertex element in " + path);
    return mesh;
}

} // namespace scv2
