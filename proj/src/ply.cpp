#include "splatgrasp/ply.hpp"

#include "splatgrasp/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

namespace splatgrasp {

static_assert(std::endian::native == std::endian::little, "binary PLY I/O assumes a little-endian host");

namespace {

std::size_t scalarSize(PlyScalar t) {
    switch (t) {
    case PlyScalar::Int8:
    case PlyScalar::UInt8: return 1;
    case PlyScalar::Int16:
    case PlyScalar::UInt16: return 2;
    case PlyScalar::Int32:
    case PlyScalar::UInt32:
    case PlyScalar::Float32: return 4;
    case PlyScalar::Float64: return 8;
    }
    return 0;
}

PlyScalar parseScalar(const std::string &s) {
    if (s == "char" || s == "int8") return PlyScalar::Int8;
    if (s == "uchar" || s == "uint8") return PlyScalar::UInt8;
    if (s == "short" || s == "int16") return PlyScalar::Int16;
    if (s == "ushort" || s == "uint16") return PlyScalar::UInt16;
    if (s == "int" || s == "int32") return PlyScalar::Int32;
    if (s == "uint" || s == "uint32") return PlyScalar::UInt32;
    if (s == "float" || s == "float32") return PlyScalar::Float32;
    if (s == "double" || s == "float64") return PlyScalar::Float64;
    throw ParseError("ply: unknown scalar type '" + s + "'");
}

const char *scalarName(PlyScalar t) {
    switch (t) {
    case PlyScalar::Int8: return "char";
    case PlyScalar::UInt8: return "uchar";
    case PlyScalar::Int16: return "short";
    case PlyScalar::UInt16: return "ushort";
    case PlyScalar::Int32: return "int";
    case PlyScalar::UInt32: return "uint";
    case PlyScalar::Float32: return "float";
    case PlyScalar::Float64: return "double";
    }
    return "";
}

template <typename T> T load(const char *p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

double readBinary(PlyScalar t, const char *p) {
    switch (t) {
    case PlyScalar::Int8: return load<std::int8_t>(p);
    case PlyScalar::UInt8: return load<std::uint8_t>(p);
    case PlyScalar::Int16: return load<std::int16_t>(p);
    case PlyScalar::UInt16: return load<std::uint16_t>(p);
    case PlyScalar::Int32: return load<std::int32_t>(p);
    case PlyScalar::UInt32: return load<std::uint32_t>(p);
    case PlyScalar::Float32: return load<float>(p);
    case PlyScalar::Float64: return load<double>(p);
    }
    return 0.0;
}

template <typename T> void store(std::string &out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T> T castInteger(double v) {
    const double r = std::round(v);
    if (r < static_cast<double>(std::numeric_limits<T>::min())) return std::numeric_limits<T>::min();
    if (r > static_cast<double>(std::numeric_limits<T>::max())) return std::numeric_limits<T>::max();
    return static_cast<T>(r);
}

void writeBinary(std::string &out, PlyScalar t, double v) {
    switch (t) {
    case PlyScalar::Int8: store(out, castInteger<std::int8_t>(v)); break;
    case PlyScalar::UInt8: store(out, castInteger<std::uint8_t>(v)); break;
    case PlyScalar::Int16: store(out, castInteger<std::int16_t>(v)); break;
    case PlyScalar::UInt16: store(out, castInteger<std::uint16_t>(v)); break;
    case PlyScalar::Int32: store(out, castInteger<std::int32_t>(v)); break;
    case PlyScalar::UInt32: store(out, castInteger<std::uint32_t>(v)); break;
    case PlyScalar::Float32: store(out, static_cast<float>(v)); break;
    case PlyScalar::Float64: store(out, v); break;
    }
}

void writeAscii(std::ostringstream &os, PlyScalar t, double v) {
    switch (t) {
    case PlyScalar::Int8: os << int(castInteger<std::int8_t>(v)); break;
    case PlyScalar::UInt8: os << int(castInteger<std::uint8_t>(v)); break;
    case PlyScalar::Int16: os << castInteger<std::int16_t>(v); break;
    case PlyScalar::UInt16: os << castInteger<std::uint16_t>(v); break;
    case PlyScalar::Int32: os << castInteger<std::int32_t>(v); break;
    case PlyScalar::UInt32: os << castInteger<std::uint32_t>(v); break;
    case PlyScalar::Float32: {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(static_cast<float>(v)));
        os << buf;
        break;
    }
    case PlyScalar::Float64: {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf;
        break;
    }
    }
}

} // namespace

int PlyElement::find(const std::string &property) const {
    for (std::size_t i = 0; i < properties.size(); ++i)
        if (properties[i].name == property && !properties[i].isList) return static_cast<int>(i);
    return -1;
}

const std::vector<double> &PlyElement::column(const std::string &property) const {
    const int i = find(property);
    if (i < 0) throw ParseError("ply: element '" + name + "' has no property '" + property + "'");
    return columns[static_cast<std::size_t>(i)];
}

const PlyElement *PlyDocument::find(const std::string &element) const {
    for (const auto &e : elements)
        if (e.name == element) return &e;
    return nullptr;
}

PlyDocument parse_ply(const std::string &bytes) {
    std::size_t pos = 0;
    auto nextLine = [&]() -> std::string {
        if (pos >= bytes.size()) throw ParseError("ply: unexpected end of header");
        std::size_t end = bytes.find('\n', pos);
        if (end == std::string::npos) end = bytes.size();
        std::string line = bytes.substr(pos, end - pos);
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };

    if (nextLine() != "ply") throw ParseError("ply: missing magic line");
    PlyDocument doc;
    bool haveFormat = false;
    for (;;) {
        const std::string line = nextLine();
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key.empty() || key == "obj_info") continue;
        if (key == "end_header") break;
        if (key == "comment") {
            doc.comments.push_back(line.size() > 8 ? line.substr(8) : std::string());
        } else if (key == "format") {
            std::string fmt, version;
            ls >> fmt >> version;
            if (fmt == "ascii") doc.format = PlyFormat::Ascii;
            else if (fmt == "binary_little_endian") doc.format = PlyFormat::BinaryLittleEndian;
            else throw ParseError("ply: unsupported format '" + fmt + "'");
            haveFormat = true;
        } else if (key == "element") {
            PlyElement e;
            long long count = -1;
            ls >> e.name >> count;
            if (e.name.empty() || count < 0) throw ParseError("ply: malformed element line");
            e.count = static_cast<std::size_t>(count);
            doc.elements.push_back(std::move(e));
        } else if (key == "property") {
            if (doc.elements.empty()) throw ParseError("ply: property before any element");
            PlyProperty p;
            std::string type;
            ls >> type;
            if (type == "list") {
                std::string countType, itemType;
                ls >> countType >> itemType >> p.name;
                p.isList = true;
                p.countType = parseScalar(countType);
                p.type = parseScalar(itemType);
            } else {
                p.type = parseScalar(type);
                ls >> p.name;
            }
            if (p.name.empty()) throw ParseError("ply: property without a name");
            doc.elements.back().properties.push_back(p);
        } else {
            throw ParseError("ply: unknown header keyword '" + key + "'");
        }
    }
    if (!haveFormat) throw ParseError("ply: missing format line");

    for (auto &e : doc.elements) {
        e.columns.assign(e.properties.size(), {});
        for (std::size_t p = 0; p < e.properties.size(); ++p)
            if (!e.properties[p].isList) e.columns[p].resize(e.count);
    }

    if (doc.format == PlyFormat::Ascii) {
        std::istringstream body(bytes.substr(pos));
        body.imbue(std::locale::classic());
        for (auto &e : doc.elements) {
            for (std::size_t r = 0; r < e.count; ++r) {
                for (std::size_t p = 0; p < e.properties.size(); ++p) {
                    const auto &prop = e.properties[p];
                    double v;
                    if (!(body >> v)) throw ParseError("ply: truncated ascii body in element '" + e.name + "'");
                    if (prop.isList) {
                        if (v < 0) throw ParseError("ply: negative list length");
                        for (long long k = 0; k < static_cast<long long>(v); ++k) {
                            double item;
                            if (!(body >> item)) throw ParseError("ply: truncated ascii list");
                        }
                    } else {
                        e.columns[p][r] = v;
                    }
                }
            }
        }
        return doc;
    }

    for (auto &e : doc.elements) {
        for (std::size_t r = 0; r < e.count; ++r) {
            for (std::size_t p = 0; p < e.properties.size(); ++p) {
                const auto &prop = e.properties[p];
                if (prop.isList) {
                    const std::size_t cs = scalarSize(prop.countType);
                    if (pos + cs > bytes.size()) throw ParseError("ply: truncated binary list");
                    const double len = readBinary(prop.countType, bytes.data() + pos);
                    pos += cs;
                    if (len < 0) throw ParseError("ply: negative list length");
                    const std::size_t skip = static_cast<std::size_t>(len) * scalarSize(prop.type);
                    if (pos + skip > bytes.size()) throw ParseError("ply: truncated binary list");
                    pos += skip;
                } else {
                    const std::size_t sz = scalarSize(prop.type);
                    if (pos + sz > bytes.size())
                        throw ParseError("ply: truncated binary body in element '" + e.name + "'");
                    e.columns[p][r] = readBinary(prop.type, bytes.data() + pos);
                    pos += sz;
                }
            }
        }
    }
    return doc;
}

PlyDocument read_ply(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("ply: cannot open '" + path.string() + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_ply(bytes);
}

std::string serialize_ply(const PlyDocument &doc) {
    std::ostringstream header;
    header << "ply\n"
           << "format " << (doc.format == PlyFormat::Ascii ? "ascii" : "binary_little_endian") << " 1.0\n";
    for (const auto &c : doc.comments) header << "comment " << c << "\n";
    for (const auto &e : doc.elements) {
        header << "element " << e.name << " " << e.count << "\n";
        for (std::size_t p = 0; p < e.properties.size(); ++p) {
            if (e.properties[p].isList) throw std::invalid_argument("ply writer does not support list properties");
            if (e.columns.size() <= p || e.columns[p].size() != e.count)
                throw std::invalid_argument("ply writer: column size mismatch for '" + e.properties[p].name + "'");
            header << "property " << scalarName(e.properties[p].type) << " " << e.properties[p].name << "\n";
        }
    }
    header << "end_header\n";

    std::string out = header.str();
    if (doc.format == PlyFormat::Ascii) {
        std::ostringstream body;
        body.imbue(std::locale::classic());
        for (const auto &e : doc.elements) {
            for (std::size_t r = 0; r < e.count; ++r) {
                for (std::size_t p = 0; p < e.properties.size(); ++p) {
                    if (p) body << ' ';
                    writeAscii(body, e.properties[p].type, e.columns[p][r]);
                }
                body << '\n';
            }
        }
        out += body.str();
    } else {
        for (const auto &e : doc.elements)
            for (std::size_t r = 0; r < e.count; ++r)
                for (std::size_t p = 0; p < e.properties.size(); ++p)
                    writeBinary(out, e.properties[p].type, e.columns[p][r]);
    }
    return out;
}

void write_ply(const std::filesystem::path &path, const PlyDocument &doc) {
    const std::string bytes = serialize_ply(doc);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("ply: cannot write '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

PointCloud point_cloud_from_ply(const PlyDocument &doc) {
    const PlyElement *v = doc.find("vertex");
    if (!v) throw ParseError("ply: no vertex element");
    const auto &x = v->column("x");
    const auto &y = v->column("y");
    const auto &z = v->column("z");
    std::vector<Point3> pts(v->count);
    for (std::size_t i = 0; i < v->count; ++i) pts[i] = Point3(x[i], y[i], z[i]);

    std::vector<Vec3> nrm;
    if (v->find("nx") >= 0 && v->find("ny") >= 0 && v->find("nz") >= 0) {
        const auto &nx = v->column("nx");
        const auto &ny = v->column("ny");
        const auto &nz = v->column("nz");
        nrm.resize(v->count);
        for (std::size_t i = 0; i < v->count; ++i) {
            const Vec3 n(nx[i], ny[i], nz[i]);
            const double len = n.norm();
            if (!(len > 0.0)) throw ParseError("ply: zero-length normal at vertex " + std::to_string(i));
            nrm[i] = n / len; // float32 storage loses unit length
        }
    }
    std::vector<Rgb> col;
    if (v->find("red") >= 0 && v->find("green") >= 0 && v->find("blue") >= 0) {
        const auto &r = v->column("red");
        const auto &g = v->column("green");
        const auto &b = v->column("blue");
        const int ri = v->find("red");
        const double denom = v->properties[static_cast<std::size_t>(ri)].type == PlyScalar::UInt8 ? 255.0 : 1.0;
        col.resize(v->count);
        for (std::size_t i = 0; i < v->count; ++i) col[i] = Rgb(r[i], g[i], b[i]) / denom;
    }
    try {
        return PointCloud(std::move(pts), std::move(nrm), std::move(col));
    } catch (const std::exception &e) {
        throw ParseError(std::string("ply: invalid point cloud: ") + e.what());
    }
}

PointCloud read_point_cloud(const std::filesystem::path &path) { return point_cloud_from_ply(read_ply(path)); }

PlyDocument point_cloud_to_ply(const PointCloud &cloud, PlyFormat format) {
    PlyDocument doc;
    doc.format = format;
    PlyElement v;
    v.name = "vertex";
    v.count = cloud.size();
    auto add = [&](const char *name, PlyScalar type, auto get) {
        v.properties.push_back({name, type});
        std::vector<double> col(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i) col[i] = get(i);
        v.columns.push_back(std::move(col));
    };
    for (int a = 0; a < 3; ++a) {
        static const char *names[] = {"x", "y", "z"};
        add(names[a], PlyScalar::Float32, [&](std::size_t i) { return cloud[i][a]; });
    }
    if (cloud.has_normals()) {
        for (int a = 0; a < 3; ++a) {
            static const char *names[] = {"nx", "ny", "nz"};
            add(names[a], PlyScalar::Float32, [&](std::size_t i) { return cloud.normals()[i][a]; });
        }
    }
    if (cloud.has_colors()) {
        for (int a = 0; a < 3; ++a) {
            static const char *names[] = {"red", "green", "blue"};
            add(names[a], PlyScalar::UInt8,
                [&](std::size_t i) { return std::clamp(cloud.colors()[i][a], 0.0, 1.0) * 255.0; });
        }
    }
    doc.elements.push_back(std::move(v));
    return doc;
}

void write_point_cloud(const std::filesystem::path &path, const PointCloud &cloud, PlyFormat format) {
    write_ply(path, point_cloud_to_ply(cloud, format));
}

} // namespace splatgrasp
