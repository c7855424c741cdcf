#pragma once

#include "splatgrasp/geometry.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace splatgrasp {

enum class PlyFormat { Ascii, BinaryLittleEndian };

enum class PlyScalar { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

struct PlyProperty {
    std::string name;
    PlyScalar type = PlyScalar::Float32;
    bool isList = false;
    PlyScalar countType = PlyScalar::UInt8;
};

/// One element block. Scalar properties are decoded into `columns` (one
/// vector per property, in declaration order); list properties are parsed
/// and dropped, leaving their column empty.
struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;
    std::vector<std::vector<double>> columns;

    /// Index of a scalar property, or -1.
    int find(const std::string &property) const;
    const std::vector<double> &column(const std::string &property) const;
};

struct PlyDocument {
    PlyFormat format = PlyFormat::BinaryLittleEndian;
    std::vector<std::string> comments;
    std::vector<PlyElement> elements;

    const PlyElement *find(const std::string &element) const;
};

/// Accepts ascii and binary_little_endian. Throws ParseError.
PlyDocument read_ply(const std::filesystem::path &path);
PlyDocument parse_ply(const std::string &bytes);

/// Writes scalar properties only; values are cast to each property's type.
void write_ply(const std::filesystem::path &path, const PlyDocument &doc);
std::string serialize_ply(const PlyDocument &doc);

/// vertex x,y,z with optional nx,ny,nz and red,green,blue (uchar).
PointCloud read_point_cloud(const std::filesystem::path &path);
PointCloud point_cloud_from_ply(const PlyDocument &doc);
PlyDocument point_cloud_to_ply(const PointCloud &cloud, PlyFormat format = PlyFormat::BinaryLittleEndian);
void write_point_cloud(const std::filesystem::path &path, const PointCloud &cloud,
                       PlyFormat format = PlyFormat::BinaryLittleEndian);

} // namespace splatgrasp
