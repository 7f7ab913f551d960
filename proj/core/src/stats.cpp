#include "vdm/stats.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "vdm/errors.hpp"

#include <nlohmann/json.hpp>

namespace vdm {

void validate_box(const Box3D& box) {
    if (box.length <= 0.0 || box.width <= 0.0 || box.height <= 0.0)
        throw ConfigError("box: all size components must be positive");
}

bool point_in_box(double x, double y, double z, const Box3D& box) {
    const double dx = x - box.cx;
    const double dy = y - box.cy;
    const double dz = z - box.cz;
    // Rotate the offset into the box frame (inverse yaw rotation).
    const double cs = std::cos(box.yaw);
    const double sn = std::sin(box.yaw);
    const double lx = cs * dx + sn * dy;
    const double ly = -sn * dx + cs * dy;
    return std::abs(lx) <= 0.5 * box.length && std::abs(ly) <= 0.5 * box.width &&
           std::abs(dz) <= 0.5 * box.height;
}

bool is_foreground(const VoxelCoord& coord, const GridSpec& grid,
                   const std::vector<Box3D>& boxes) {
    double x, y, z;
    grid.voxel_center(coord, x, y, z);
    for (const Box3D& b : boxes)
        if (point_in_box(x, y, z, b)) return true;
    return false;
}

std::uint64_t count_foreground(const SparseTensor& t, const GridSpec& grid,
                               const std::vector<Box3D>& boxes) {
    std::uint64_t n = 0;
    for (const VoxelCoord& c : t.coords())
        if (is_foreground(c, grid, boxes)) ++n;
    return n;
}

DiffusionReport summarize(const std::vector<FrameCounts>& per_frame,
                          const std::string& stage_label) {
    if (per_frame.empty()) throw InputError("report: empty frame list");
    // The averaging rule: totals across all frames divided by the frame
    // count, accumulated in frame order.
    double overall_before = 0.0, overall_after = 0.0;
    double fg_before = 0.0, fg_after = 0.0;
    for (const FrameCounts& counts : per_frame) {
        overall_before += static_cast<double>(counts.overall_before);
        overall_after += static_cast<double>(counts.overall_after);
        fg_before += static_cast<double>(counts.foreground_before);
        fg_after += static_cast<double>(counts.foreground_after);
    }
    DiffusionReport rep;
    rep.frames = per_frame.size();
    rep.stage = stage_label;
    const double inv = 1.0 / static_cast<double>(per_frame.size());
    rep.overall_before = overall_before * inv;
    rep.overall_after = overall_after * inv;
    rep.foreground_before = fg_before * inv;
    rep.foreground_after = fg_after * inv;
    return rep;
}

DiffusionReport report(const std::vector<Frame>& frames, const GridSpec& grid,
                       const PipelineStage& stage, const std::string& stage_label,
                       std::vector<FrameCounts>* per_frame) {
    if (frames.empty()) throw InputError("report: empty frame list");

    std::vector<FrameCounts> counts_list;
    counts_list.reserve(frames.size());
    for (const Frame& frame : frames) {
        FrameCounts counts;
        counts.overall_before = frame.tensor.num_active();
        counts.foreground_before = count_foreground(frame.tensor, grid, frame.boxes);

        const StageResult staged = stage(frame.tensor, grid);
        counts.overall_after = staged.tensor.num_active();
        counts.foreground_after =
            count_foreground(staged.tensor, staged.grid, frame.boxes);
        counts_list.push_back(counts);
        if (per_frame) per_frame->push_back(counts);
    }
    return summarize(counts_list, stage_label);
}

std::string report_to_json(const DiffusionReport& report) {
    nlohmann::json j;
    j["frames"] = report.frames;
    j["overall_before"] = report.overall_before;
    j["overall_after"] = report.overall_after;
    j["foreground_before"] = report.foreground_before;
    j["foreground_after"] = report.foreground_after;
    j["stage"] = report.stage;
    return j.dump(2) + "\n";
}

namespace {

std::string format_count(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

} // namespace

std::string render_table(const DiffusionReport& report,
                         const std::string& before_label,
                         const std::string& after_label) {
    const std::string col1 = "Method";
    const std::string col2 = "Overall Voxel Count";
    const std::string col3 = "Foreground Voxel Count";

    auto width = [](std::size_t a, std::size_t b) { return a > b ? a : b; };
    const std::size_t w1 = width(col1.size(),
                                 width(before_label.size(), after_label.size()));
    const std::string ob = format_count(report.overall_before);
    const std::string oa = format_count(report.overall_after);
    const std::string fb = format_count(report.foreground_before);
    const std::string fa = format_count(report.foreground_after);
    const std::size_t w2 = width(col2.size(), width(ob.size(), oa.size()));
    const std::size_t w3 = width(col3.size(), width(fb.size(), fa.size()));

    auto row = [&](const std::string& a, const std::string& b, const std::string& c) {
        std::ostringstream os;
        os << a << std::string(w1 - a.size(), ' ') << " | ";
        os << b << std::string(w2 - b.size(), ' ') << " | ";
        os << c << std::string(w3 - c.size(), ' ') << "\n";
        return os.str();
    };

    std::string out = row(col1, col2, col3);
    out += std::string(w1, '-') + "-+-" + std::string(w2, '-') + "-+-" +
           std::string(w3, '-') + "\n";
    out += row(before_label, ob, fb);
    out += row(after_label, oa, fa);
    return out;
}

std::string slice_to_pgm(const SparseTensor& t, const GridSpec& grid,
                         const std::vector<Box3D>& boxes, std::int32_t iz) {
    const Shape3 s = t.shape();
    if (iz < 0 || iz >= s.nz) throw InputError("slice_to_pgm: z index out of range");

    std::vector<unsigned char> pixels(static_cast<std::size_t>(s.ny) * s.nx, 0);
    for (const VoxelCoord& c : t.coords()) {
        if (c.iz != iz) continue;
        const std::size_t idx = static_cast<std::size_t>(c.iy) * s.nx + c.ix;
        pixels[idx] = is_foreground(c, grid, boxes) ? 255 : 128;
    }

    std::ostringstream os;
    os << "P5\n" << s.nx << " " << s.ny << "\n255\n";
    os.write(reinterpret_cast<const char*>(pixels.data()),
             static_cast<std::streamsize>(pixels.size()));
    return os.str();
}

} // namespace vdm
