#include "vdm/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vdm/errors.hpp"

namespace vdm {

std::string to_string(PipelineKind kind) {
    switch (kind) {
        case PipelineKind::vdm_ssm: return "vdm_ssm";
        case PipelineKind::vdm_attn: return "vdm_attn";
        case PipelineKind::only_diffusion: return "only_diffusion";
    }
    return "vdm_ssm";
}

PipelineKind pipeline_kind_from_string(const std::string& s) {
    if (s == "vdm_ssm") return PipelineKind::vdm_ssm;
    if (s == "vdm_attn") return PipelineKind::vdm_attn;
    if (s == "only_diffusion") return PipelineKind::only_diffusion;
    throw ConfigError("unknown pipeline '" + s + "'");
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

double to_double(const std::string& key, const std::string& v) {
    double out;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
    std::int64_t out;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
    return out;
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> parts;
    std::string part;
    std::istringstream is(v);
    while (std::getline(is, part, ',')) parts.push_back(trim(part));
    return parts;
}

void parse_triple(const std::string& key, const std::string& v, double out[3]) {
    const auto parts = split_list(v);
    if (parts.size() != 3)
        throw ConfigError(key + ": expected three comma-separated values");
    for (int i = 0; i < 3; ++i) out[i] = to_double(key, parts[static_cast<std::size_t>(i)]);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void apply_preset(RunConfig& cfg, const std::string& name) {
    // Per-dataset voxel sizes (x, y, z meters); all presets share the plan.
    if (name == "waymo") {
        cfg.grid.voxel_size_x = 0.08;
        cfg.grid.voxel_size_y = 0.08;
        cfg.grid.voxel_size_z = 0.1875;
    } else if (name == "nuscenes") {
        cfg.grid.voxel_size_x = 0.075;
        cfg.grid.voxel_size_y = 0.075;
        cfg.grid.voxel_size_z = 0.25;
    } else if (name == "argoverse2" || name == "once") {
        cfg.grid.voxel_size_x = 0.1;
        cfg.grid.voxel_size_y = 0.1;
        cfg.grid.voxel_size_z = 0.25;
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    cfg.channel_plan = {64, 32, 64, 128};
}

RunConfig default_config() {
    RunConfig cfg;
    cfg.grid.voxel_size_x = 0.32;
    cfg.grid.voxel_size_y = 0.32;
    cfg.grid.voxel_size_z = 0.1875;
    cfg.grid.shape = Shape3{8, 64, 64};
    return cfg;
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg = default_config();
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));

        if (key == "grid.origin") {
            double v[3];
            parse_triple(key, value, v);
            cfg.grid.origin_x = v[0];
            cfg.grid.origin_y = v[1];
            cfg.grid.origin_z = v[2];
        } else if (key == "grid.voxel_size") {
            double v[3];
            parse_triple(key, value, v);
            cfg.grid.voxel_size_x = v[0];
            cfg.grid.voxel_size_y = v[1];
            cfg.grid.voxel_size_z = v[2];
        } else if (key == "grid.shape") {
            const auto parts = split_list(value);
            if (parts.size() != 3)
                throw ConfigError(key + ": expected nz,ny,nx");
            cfg.grid.shape.nz = static_cast<std::int32_t>(to_int(key, parts[0]));
            cfg.grid.shape.ny = static_cast<std::int32_t>(to_int(key, parts[1]));
            cfg.grid.shape.nx = static_cast<std::int32_t>(to_int(key, parts[2]));
        } else if (key == "pipeline") {
            cfg.pipeline = pipeline_kind_from_string(value);
        } else if (key == "seed") {
            cfg.seed = to_u64(key, value);
        } else if (key == "out") {
            cfg.out_dir = value;
        } else if (key == "vdm.channel_plan") {
            cfg.channel_plan.clear();
            for (const std::string& p : split_list(value))
                cfg.channel_plan.push_back(static_cast<std::int32_t>(to_int(key, p)));
        } else if (key == "vdm.z_stride") {
            cfg.z_stride = static_cast<std::int32_t>(to_int(key, value));
        } else if (key == "vdm.refine_factor") {
            cfg.refine_factor = static_cast<std::int32_t>(to_int(key, value));
        } else if (key == "vdm.od_voxel_scale") {
            cfg.od_voxel_scale = static_cast<std::int32_t>(to_int(key, value));
        } else if (key == "weights.dir") {
            cfg.weights_dir = value;
        } else if (key == "serialize.group_size") {
            cfg.group_size = static_cast<std::int32_t>(to_int(key, value));
        } else if (key == "serialize.order") {
            if (value != "x" && value != "y")
                throw ConfigError("serialize.order: expected x or y");
            cfg.serialize_order = value[0];
        } else if (key == "seq.blocks") {
            cfg.seq_blocks = static_cast<std::int32_t>(to_int(key, value));
        } else if (key == "seq.d_k") {
            cfg.d_k = static_cast<std::int32_t>(to_int(key, value));
        } else if (key == "seq.ssm_state_dim") {
            cfg.ssm_state_dim = static_cast<std::int32_t>(to_int(key, value));
        } else if (key == "seq.ssm_delta") {
            cfg.ssm_delta = to_double(key, value);
        } else if (key == "scene.count") {
            cfg.scene_count = static_cast<std::int32_t>(to_int(key, value));
        } else if (key == "scene.boxes") {
            cfg.scene.box_count = static_cast<std::int32_t>(to_int(key, value));
        } else if (key == "scene.points_per_box") {
            cfg.scene.points_per_box = static_cast<std::int32_t>(to_int(key, value));
        } else if (key == "scene.background_points") {
            cfg.scene.background_points = static_cast<std::int32_t>(to_int(key, value));
        } else if (key == "scene.feature_dim") {
            cfg.scene.feature_dim = static_cast<std::int32_t>(to_int(key, value));
        } else if (key == "scene.box_size_min") {
            parse_triple(key, value, cfg.scene.box_size_min);
        } else if (key == "scene.box_size_max") {
            parse_triple(key, value, cfg.scene.box_size_max);
        } else {
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": unknown key '" + key + "'");
        }
    }
    validate_config(cfg);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string save_config(const RunConfig& cfg) {
    std::ostringstream os;
    os << "grid.origin = " << fmt(cfg.grid.origin_x) << "," << fmt(cfg.grid.origin_y)
       << "," << fmt(cfg.grid.origin_z) << "\n";
    os << "grid.voxel_size = " << fmt(cfg.grid.voxel_size_x) << ","
       << fmt(cfg.grid.voxel_size_y) << "," << fmt(cfg.grid.voxel_size_z) << "\n";
    os << "grid.shape = " << cfg.grid.shape.nz << "," << cfg.grid.shape.ny << ","
       << cfg.grid.shape.nx << "\n";
    os << "pipeline = " << to_string(cfg.pipeline) << "\n";
    os << "seed = " << cfg.seed << "\n";
    os << "out = " << cfg.out_dir << "\n";
    os << "vdm.channel_plan = ";
    for (std::size_t i = 0; i < cfg.channel_plan.size(); ++i)
        os << (i ? "," : "") << cfg.channel_plan[i];
    os << "\n";
    os << "vdm.z_stride = " << cfg.z_stride << "\n";
    os << "vdm.refine_factor = " << cfg.refine_factor << "\n";
    os << "vdm.od_voxel_scale = " << cfg.od_voxel_scale << "\n";
    if (!cfg.weights_dir.empty()) os << "weights.dir = " << cfg.weights_dir << "\n";
    os << "serialize.group_size = " << cfg.group_size << "\n";
    os << "serialize.order = " << cfg.serialize_order << "\n";
    os << "seq.blocks = " << cfg.seq_blocks << "\n";
    os << "seq.d_k = " << cfg.d_k << "\n";
    os << "seq.ssm_state_dim = " << cfg.ssm_state_dim << "\n";
    os << "seq.ssm_delta = " << fmt(cfg.ssm_delta) << "\n";
    os << "scene.count = " << cfg.scene_count << "\n";
    os << "scene.boxes = " << cfg.scene.box_count << "\n";
    os << "scene.points_per_box = " << cfg.scene.points_per_box << "\n";
    os << "scene.background_points = " << cfg.scene.background_points << "\n";
    os << "scene.feature_dim = " << cfg.scene.feature_dim << "\n";
    os << "scene.box_size_min = " << fmt(cfg.scene.box_size_min[0]) << ","
       << fmt(cfg.scene.box_size_min[1]) << "," << fmt(cfg.scene.box_size_min[2])
       << "\n";
    os << "scene.box_size_max = " << fmt(cfg.scene.box_size_max[0]) << ","
       << fmt(cfg.scene.box_size_max[1]) << "," << fmt(cfg.scene.box_size_max[2])
       << "\n";
    return os.str();
}

void validate_config(const RunConfig& cfg) {
    validate_grid(cfg.grid);
    if (cfg.channel_plan.size() < 2)
        throw ConfigError("vdm.channel_plan: need at least two widths");
    for (std::int32_t w : cfg.channel_plan)
        if (w < 1) throw ConfigError("vdm.channel_plan: widths must be positive");
    if (cfg.z_stride < 1) throw ConfigError("vdm.z_stride must be >= 1");
    if (cfg.refine_factor < 1) throw ConfigError("vdm.refine_factor must be >= 1");
    if (cfg.od_voxel_scale < 1) throw ConfigError("vdm.od_voxel_scale must be >= 1");
    if (cfg.group_size < 1) throw ConfigError("serialize.group_size must be >= 1");
    if (cfg.serialize_order != 'x' && cfg.serialize_order != 'y')
        throw ConfigError("serialize.order must be x or y");
    if (cfg.seq_blocks < 0) throw ConfigError("seq.blocks must be >= 0");
    if (cfg.d_k < 1) throw ConfigError("seq.d_k must be >= 1");
    if (cfg.ssm_state_dim < 1) throw ConfigError("seq.ssm_state_dim must be >= 1");
    if (!(cfg.ssm_delta > 0.0)) throw ConfigError("seq.ssm_delta must be > 0");
    if (cfg.scene_count < 0) throw ConfigError("scene.count must be >= 0");
    if (cfg.scene.feature_dim < 1) throw ConfigError("scene.feature_dim must be >= 1");
    for (int i = 0; i < 3; ++i) {
        if (cfg.scene.box_size_min[i] <= 0.0 ||
            cfg.scene.box_size_max[i] < cfg.scene.box_size_min[i])
            throw ConfigError("scene box size range is invalid");
    }
}

} // namespace vdm
