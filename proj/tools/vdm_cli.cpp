// Command-line front end: scene generation, voxelization dumps, the full
// pipeline, voxel-count statistics, sequence dumps, gradient checks, and
// weight blob export. Every command exits 0 on success and nonzero with a
// single-line `error: ...` message on failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vdm/config.hpp"
#include "vdm/errors.hpp"
#include "vdm/io.hpp"
#include "vdm/pipeline.hpp"
#include "vdm/serialize.hpp"
#include "vdm/stats.hpp"
#include "vdm/weights_io.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> preset;
    bool only_diffusion = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "run config file (key = value)");
    cmd->add_option("--seed", flags.seed, "override the config seed");
    cmd->add_option("--out", flags.out, "output directory");
    cmd->add_option("--preset", flags.preset,
                    "voxel-size preset: waymo, nuscenes, argoverse2, once");
    cmd->add_flag("--only-diffusion", flags.only_diffusion,
                  "force the only-diffusion pipeline");
}

vdm::RunConfig assemble(const CommonFlags& flags) {
    vdm::RunConfig cfg = flags.config_path.empty()
                             ? vdm::default_config()
                             : vdm::load_config(flags.config_path);
    if (flags.preset) vdm::apply_preset(cfg, *flags.preset);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out) cfg.out_dir = *flags.out;
    if (flags.only_diffusion) cfg.pipeline = vdm::PipelineKind::only_diffusion;
    vdm::validate_config(cfg);
    return cfg;
}

std::string ensure_out_dir(const vdm::RunConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    return cfg.out_dir;
}

std::string scene_dir_name(std::int32_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "scene_%03d", index);
    return buf;
}

int cmd_gen_scene(const vdm::RunConfig& cfg) {
    const std::string dir = ensure_out_dir(cfg);
    const std::vector<vdm::Scene> scenes = vdm::generate_scenes(cfg);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const std::string sub = dir + "/" + scene_dir_name(static_cast<std::int32_t>(i));
        std::filesystem::create_directories(sub);
        vdm::write_points_csv(sub + "/points.csv", scenes[i].points);
        vdm::write_boxes_csv(sub + "/boxes.csv", scenes[i].boxes);
    }
    std::cout << "wrote " << scenes.size() << " scenes to " << dir << "\n";
    return 0;
}

int cmd_voxelize(const vdm::RunConfig& cfg, const std::string& points_path) {
    const std::string dir = ensure_out_dir(cfg);
    const auto points = vdm::read_points_csv(points_path);
    const vdm::GridSpec grid = vdm::effective_grid(cfg);
    const vdm::VoxelizeResult result = vdm::voxelize(points, grid);
    vdm::write_voxels_csv(dir + "/voxels.csv", result.tensor);
    std::cout << "voxels=" << result.tensor.num_active()
              << " dropped=" << result.dropped << " out=" << dir << "/voxels.csv\n";
    return 0;
}

int cmd_run(const vdm::RunConfig& cfg, int threads) {
    const std::string dir = ensure_out_dir(cfg);
    const std::vector<vdm::Scene> scenes = vdm::generate_scenes(cfg);
    const vdm::RunResult result = vdm::run_pipeline(cfg, scenes, threads);
    vdm::write_text_file(dir + "/report.json", vdm::run_result_to_json(cfg, result));
    std::cout << "frames=" << result.report.frames
              << " overall_before=" << result.report.overall_before
              << " overall_after=" << result.report.overall_after << " report=" << dir
              << "/report.json\n";
    return 0;
}

int cmd_stats(const vdm::RunConfig& cfg, bool slices) {
    const std::string dir = ensure_out_dir(cfg);
    const vdm::GridSpec grid = vdm::effective_grid(cfg);
    const std::vector<vdm::Scene> scenes = vdm::generate_scenes(cfg);
    const vdm::PipelineModel model = vdm::build_model(cfg);

    std::vector<vdm::Frame> frames;
    frames.reserve(scenes.size());
    for (const vdm::Scene& scene : scenes)
        frames.push_back(
            {vdm::voxelize(scene.points, grid).tensor, scene.boxes});

    const vdm::PipelineStage stage = vdm::make_vdm_stage(model);
    const vdm::DiffusionReport rep =
        vdm::report(frames, grid, stage, vdm::to_string(cfg.pipeline));

    vdm::write_text_file(dir + "/stats.json", vdm::report_to_json(rep));
    const std::string after_label =
        cfg.pipeline == vdm::PipelineKind::only_diffusion ? "VDM(OD)" : "VDM";
    vdm::write_text_file(dir + "/table.txt",
                         vdm::render_table(rep, "baseline", after_label));

    if (slices && !frames.empty()) {
        const std::string sdir = dir + "/slices";
        std::filesystem::create_directories(sdir);
        const vdm::Frame& f0 = frames.front();
        for (std::int32_t iz = 0; iz < f0.tensor.shape().nz; ++iz)
            vdm::write_text_file(sdir + "/before_z" + std::to_string(iz) + ".pgm",
                                 vdm::slice_to_pgm(f0.tensor, grid, f0.boxes, iz));
        const vdm::StageResult staged = stage(f0.tensor, grid);
        for (std::int32_t iz = 0; iz < staged.tensor.shape().nz; ++iz)
            vdm::write_text_file(
                sdir + "/after_z" + std::to_string(iz) + ".pgm",
                vdm::slice_to_pgm(staged.tensor, staged.grid, f0.boxes, iz));
    }
    std::cout << vdm::render_table(rep, "baseline", after_label);
    return 0;
}

int cmd_serialize(const vdm::RunConfig& cfg, const std::string& points_path,
                  const std::string& order_name, std::int32_t group_size) {
    const std::string dir = ensure_out_dir(cfg);
    vdm::SerializeOrder order;
    if (order_name == "x")
        order = vdm::SerializeOrder::x_major;
    else if (order_name == "y")
        order = vdm::SerializeOrder::y_major;
    else
        throw vdm::ConfigError("--order must be x or y");

    const auto points = vdm::read_points_csv(points_path);
    const vdm::GridSpec grid = vdm::effective_grid(cfg);
    const vdm::SparseTensor t = vdm::voxelize(points, grid).tensor;
    const vdm::VoxelSequence seq =
        vdm::serialize(t, order, group_size > 0 ? group_size : cfg.group_size);
    vdm::write_sequence_csv(dir + "/sequence.csv", seq, t);
    std::cout << "length=" << seq.indices.size() << " groups=" << seq.groups.size()
              << " out=" << dir << "/sequence.csv\n";
    return 0;
}

int cmd_gradcheck(const vdm::RunConfig& cfg, double tolerance) {
    const std::string dir = ensure_out_dir(cfg);
    const vdm::GradCheckReport rep = vdm::gradcheck(cfg, tolerance);
    vdm::write_text_file(dir + "/gradcheck.json",
                         vdm::gradcheck_to_json(rep, tolerance));
    for (const vdm::GradCheckEntry& e : rep.entries)
        std::cout << e.name << " max_rel_err=" << e.max_rel_err << " (" << e.count
                  << " params)\n";
    std::cout << "worst=" << rep.worst << " at " << rep.worst_name << " checked="
              << rep.params_checked << "\n";
    if (!rep.pass(tolerance))
        throw vdm::Error("gradcheck failed: " + rep.worst_name + " rel err " +
                         std::to_string(rep.worst) + " > tolerance");
    return 0;
}

int cmd_dump_weights(const vdm::RunConfig& cfg) {
    const std::string dir = ensure_out_dir(cfg);
    const vdm::PipelineModel model = vdm::build_model(cfg);
    const std::string wdir = dir + "/weights";
    vdm::dump_weights(model.vdm, wdir);
    std::cout << "weights written to " << wdir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse voxel diffusion pipeline"};
    app.set_version_flag("--version", "vdm 0.1.0");
    app.require_subcommand(1);

    CommonFlags flags;

    auto* gen = app.add_subcommand("gen-scene", "generate synthetic scenes");
    add_common(gen, flags);

    auto* vox = app.add_subcommand("voxelize", "voxelize a point CSV");
    add_common(vox, flags);
    std::string vox_points;
    vox->add_option("--points", vox_points, "input point CSV")->required();

    auto* run = app.add_subcommand("run", "run the full pipeline");
    add_common(run, flags);
    int threads = 1;
    run->add_option("--threads", threads, "scene-level worker threads");

    auto* stats = app.add_subcommand("stats", "voxel-count report");
    add_common(stats, flags);
    bool slices = false;
    stats->add_flag("--slices", slices, "write z-slice PGM images for scene 0");

    auto* ser = app.add_subcommand("serialize", "dump a voxel sequence");
    add_common(ser, flags);
    std::string ser_points;
    std::string ser_order = "x";
    std::int32_t ser_group = 0;
    ser->add_option("--points", ser_points, "input point CSV")->required();
    ser->add_option("--order", ser_order, "scan order: x or y");
    ser->add_option("--group-size", ser_group, "override the config group size");

    auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient check");
    add_common(grad, flags);
    double tolerance = 1e-4;
    grad->add_option("--tolerance", tolerance, "max allowed relative error");

    auto* dump = app.add_subcommand("dump-weights", "write weight blobs + manifest");
    add_common(dump, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        const vdm::RunConfig cfg = assemble(flags);
        if (gen->parsed()) return cmd_gen_scene(cfg);
        if (vox->parsed()) return cmd_voxelize(cfg, vox_points);
        if (run->parsed()) return cmd_run(cfg, threads);
        if (stats->parsed()) return cmd_stats(cfg, slices);
        if (ser->parsed()) return cmd_serialize(cfg, ser_points, ser_order, ser_group);
        if (grad->parsed()) return cmd_gradcheck(cfg, tolerance);
        if (dump->parsed()) return cmd_dump_weights(cfg);
        std::cerr << "error: no subcommand\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
