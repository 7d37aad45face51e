#include "assembloid/ply_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "assembloid/errors.hpp"

namespace assembloid {

namespace {

static_assert(sizeof(double) == 8 && sizeof(float) == 4, "unexpected float sizes");

struct Property {
    std::string type;
    std::string name;
};

std::size_t scalar_size(const std::string& type) {
    if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
    if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
    if (type == "int" || type == "uint" || type == "int32" || type == "uint32" || type == "float" ||
        type == "float32")
        return 4;
    if (type == "double" || type == "float64") return 8;
    throw IoError("read_ply: unsupported property type: " + type);
}

double parse_binary_scalar(const char* buf, const std::string& type) {
    if (type == "float" || type == "float32") {
        float f;
        std::memcpy(&f, buf, 4);
        return static_cast<double>(f);
    }
    if (type == "double" || type == "float64") {
        double d;
        std::memcpy(&d, buf, 8);
        return d;
    }
    throw IoError("read_ply: coordinate property must be float or double, got " + type);
}

}  // namespace

void write_ply(const std::string& path, const PointCloud& cloud, PlyFormat format) {
    if (!finite(cloud)) throw InvalidInput("write_ply: non-finite coordinates");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_ply: cannot open " + path);

    out << "ply\n";
    out << "format "
        << (format == PlyFormat::ascii ? "ascii" : "binary_little_endian") << " 1.0\n";
    out << "element vertex " << cloud.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    out << "end_header\n";

    if (format == PlyFormat::ascii) {
        char line[128];
        for (const Vec3& p : cloud.points) {
            std::snprintf(line, sizeof(line), "%.17g %.17g %.17g\n", p.x, p.y, p.z);
            out << line;
        }
    } else {
        for (const Vec3& p : cloud.points) {
            const double xyz[3] = {p.x, p.y, p.z};
            out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
        }
    }
    if (!out) throw IoError("write_ply: write failed for " + path);
}

PointCloud read_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_ply: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw IoError("read_ply: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "ply") throw IoError("read_ply: missing ply magic in " + path);

    bool binary = false;
    std::size_t vertex_count = 0;
    std::vector<Property> vertex_props;
    std::string current_element;
    bool header_done = false;

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "comment" || tok.empty()) continue;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "ascii") binary = false;
            else if (fmt == "binary_little_endian") binary = true;
            else throw IoError("read_ply: unsupported format " + fmt);
        } else if (tok == "element") {
            std::size_t count = 0;
            ls >> current_element >> count;
            if (current_element == "vertex") vertex_count = count;
        } else if (tok == "property") {
            Property p;
            ls >> p.type;
            if (p.type == "list") throw IoError("read_ply: list properties unsupported in vertex data");
            ls >> p.name;
            if (current_element == "vertex") vertex_props.push_back(p);
        } else if (tok == "end_header") {
            header_done = true;
            break;
        }
    }
    if (!header_done) throw IoError("read_ply: truncated header in " + path);

    int ix = -1, iy = -1, iz = -1;
    for (std::size_t i = 0; i < vertex_props.size(); ++i) {
        if (vertex_props[i].name == "x") ix = static_cast<int>(i);
        if (vertex_props[i].name == "y") iy = static_cast<int>(i);
        if (vertex_props[i].name == "z") iz = static_cast<int>(i);
    }
    if (ix < 0 || iy < 0 || iz < 0) throw IoError("read_ply: vertex element lacks x/y/z in " + path);

    PointCloud cloud;
    cloud.points.reserve(vertex_count);

    if (binary) {
        std::size_t stride = 0;
        std::vector<std::size_t> offsets(vertex_props.size());
        for (std::size_t i = 0; i < vertex_props.size(); ++i) {
            offsets[i] = stride;
            stride += scalar_size(vertex_props[i].type);
        }
        std::vector<char> row(stride);
        for (std::size_t v = 0; v < vertex_count; ++v) {
            in.read(row.data(), static_cast<std::streamsize>(stride));
            if (!in) throw IoError("read_ply: truncated vertex data in " + path);
            Vec3 p;
            p.x = parse_binary_scalar(row.data() + offsets[static_cast<std::size_t>(ix)],
                                      vertex_props[static_cast<std::size_t>(ix)].type);
            p.y = parse_binary_scalar(row.data() + offsets[static_cast<std::size_t>(iy)],
                                      vertex_props[static_cast<std::size_t>(iy)].type);
            p.z = parse_binary_scalar(row.data() + offsets[static_cast<std::size_t>(iz)],
                                      vertex_props[static_cast<std::size_t>(iz)].type);
            cloud.points.push_back(p);
        }
    } else {
        for (std::size_t v = 0; v < vertex_count; ++v) {
            if (!std::getline(in, line)) throw IoError("read_ply: truncated vertex data in " + path);
            std::istringstream ls(line);
            std::vector<double> vals(vertex_props.size());
            for (double& d : vals) {
                if (!(ls >> d)) throw IoError("read_ply: malformed vertex line in " + path);
            }
            cloud.points.push_back({vals[static_cast<std::size_t>(ix)],
                                    vals[static_cast<std::size_t>(iy)],
                                    vals[static_cast<std::size_t>(iz)]});
        }
    }
    if (!finite(cloud)) throw IoError("read_ply: non-finite coordinates in " + path);
    return cloud;
}

}  // namespace assembloid
