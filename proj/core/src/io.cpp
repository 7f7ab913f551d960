#include "vdm/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vdm/errors.hpp"

namespace vdm {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) fields.push_back(field);
    return fields;
}

bool parse_double(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
    auto [ptr, ec] = std::from_chars(b, e, out);
    return ec == std::errc{} && ptr == e;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for read: " + path);
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + path);
    return out;
}

} // namespace

std::vector<Point> read_points_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    std::vector<Point> points;
    std::string line;
    bool first = true;
    std::size_t feature_len = 0;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv(line);
        double probe;
        if (first && !fields.empty() && !parse_double(fields[0], probe)) {
            first = false; // header row
            continue;
        }
        first = false;
        if (fields.size() < 4)
            throw IoError(path + ":" + std::to_string(lineno) +
                          ": expected x,y,z and at least one feature");
        Point p;
        std::vector<double> values(fields.size());
        for (std::size_t i = 0; i < fields.size(); ++i)
            if (!parse_double(fields[i], values[i]))
                throw IoError(path + ":" + std::to_string(lineno) +
                              ": non-numeric field '" + fields[i] + "'");
        p.x = values[0];
        p.y = values[1];
        p.z = values[2];
        p.feature.assign(values.begin() + 3, values.end());
        if (points.empty())
            feature_len = p.feature.size();
        else if (p.feature.size() != feature_len)
            throw IoError(path + ":" + std::to_string(lineno) +
                          ": inconsistent feature length");
        points.push_back(std::move(p));
    }
    return points;
}

void write_points_csv(const std::string& path, const std::vector<Point>& points) {
    std::ofstream out = open_out(path);
    const std::size_t flen = points.empty() ? 1 : points.front().feature.size();
    out << "x,y,z";
    for (std::size_t i = 0; i < flen; ++i) out << ",f" << i;
    out << "\n";
    for (const Point& p : points) {
        out << fmt(p.x) << "," << fmt(p.y) << "," << fmt(p.z);
        for (double f : p.feature) out << "," << fmt(f);
        out << "\n";
    }
    if (!out) throw IoError("short write: " + path);
}

void write_boxes_csv(const std::string& path, const std::vector<Box3D>& boxes) {
    std::ofstream out = open_out(path);
    out << "cx,cy,cz,length,width,height,yaw\n";
    for (const Box3D& b : boxes)
        out << fmt(b.cx) << "," << fmt(b.cy) << "," << fmt(b.cz) << ","
            << fmt(b.length) << "," << fmt(b.width) << "," << fmt(b.height) << ","
            << fmt(b.yaw) << "\n";
    if (!out) throw IoError("short write: " + path);
}

std::vector<Box3D> read_boxes_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    std::vector<Box3D> boxes;
    std::string line;
    bool first = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv(line);
        double probe;
        if (first && !fields.empty() && !parse_double(fields[0], probe)) {
            first = false;
            continue;
        }
        first = false;
        if (fields.size() != 7)
            throw IoError(path + ":" + std::to_string(lineno) +
                          ": expected 7 box fields");
        double v[7];
        for (int i = 0; i < 7; ++i)
            if (!parse_double(fields[static_cast<std::size_t>(i)], v[i]))
                throw IoError(path + ":" + std::to_string(lineno) +
                              ": non-numeric field");
        boxes.push_back(Box3D{v[0], v[1], v[2], v[3], v[4], v[5], v[6]});
    }
    return boxes;
}

void write_voxels_csv(const std::string& path, const SparseTensor& t) {
    std::ofstream out = open_out(path);
    out << "iz,iy,ix";
    for (std::size_t c = 0; c < t.channels(); ++c) out << ",f" << c;
    out << "\n";
    for (std::size_t i = 0; i < t.num_active(); ++i) {
        const VoxelCoord& c = t.coords()[i];
        out << c.iz << "," << c.iy << "," << c.ix;
        for (double f : t.features().row(i)) out << "," << fmt(f);
        out << "\n";
    }
    if (!out) throw IoError("short write: " + path);
}

void write_sequence_csv(const std::string& path, const VoxelSequence& seq,
                        const SparseTensor& t) {
    std::ofstream out = open_out(path);
    out << "row_index,iz,iy,ix,group\n";
    for (std::size_t j = 0; j < seq.indices.size(); ++j) {
        const auto row = seq.indices[j];
        const VoxelCoord& c = t.coords()[static_cast<std::size_t>(row)];
        out << row << "," << c.iz << "," << c.iy << "," << c.ix << ","
            << j / static_cast<std::size_t>(seq.group_size) << "\n";
    }
    if (!out) throw IoError("short write: " + path);
}

void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + path);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("short write: " + path);
}

} // namespace vdm
