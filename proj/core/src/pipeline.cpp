#include "vdm/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <thread>

#include "vdm/errors.hpp"
#include "vdm/io.hpp"
#include "vdm/serialize.hpp"
#include "vdm/weights_io.hpp"

#include <nlohmann/json.hpp>

namespace vdm {

namespace {

// Fixed stream ids so parameter draws never collide with scene draws.
constexpr std::uint64_t kVdmParamStream = 0x100000000ULL;
constexpr std::uint64_t kSsmParamStream = 0x200000000ULL;
constexpr std::uint64_t kAttnParamStream = 0x300000000ULL;

} // namespace

GridSpec effective_grid(const RunConfig& cfg) {
    if (cfg.pipeline == PipelineKind::only_diffusion) {
        // Only-diffusion runs on an x/y-coarsened grid (voxel size scaled up),
        // which puts its output at the same resolution as the downsampled
        // full-stack output.
        GridSpec g = cfg.grid;
        g.voxel_size_x *= cfg.od_voxel_scale;
        g.voxel_size_y *= cfg.od_voxel_scale;
        g.shape.nx = std::max(1, (g.shape.nx + cfg.od_voxel_scale - 1) / cfg.od_voxel_scale);
        g.shape.ny = std::max(1, (g.shape.ny + cfg.od_voxel_scale - 1) / cfg.od_voxel_scale);
        return g;
    }
    return refine_grid(cfg.grid, cfg.refine_factor);
}

PipelineModel build_model(const RunConfig& cfg) {
    validate_config(cfg);
    PipelineModel model;
    const bool od = cfg.pipeline == PipelineKind::only_diffusion;
    model.vdm = make_vdm_spec(cfg.scene.feature_dim, cfg.channel_plan, cfg.z_stride, od);
    if (od)
        validate_vdm_spec(model.vdm);
    else
        validate_full_vdm(model.vdm);

    Rng root(cfg.seed);
    Rng vdm_rng = root.split(kVdmParamStream);
    init_vdm_params(model.vdm, vdm_rng);
    if (!cfg.weights_dir.empty()) load_weights(model.vdm, cfg.weights_dir);

    model.out_channels = od ? cfg.channel_plan.front() : cfg.channel_plan.back();

    Rng ssm_rng = root.split(kSsmParamStream);
    model.ssm.reserve(static_cast<std::size_t>(model.out_channels));
    for (std::int32_t c = 0; c < model.out_channels; ++c)
        model.ssm.push_back(make_ssm_spec(cfg.ssm_state_dim, cfg.ssm_delta, ssm_rng));

    Rng attn_rng = root.split(kAttnParamStream);
    model.attn = make_attention_spec(model.out_channels, cfg.d_k, cfg.d_k, attn_rng);
    return model;
}

GridSpec stage_output_grid(const GridSpec& in_grid, const VdmSpec& spec,
                           const Shape3& out_shape) {
    Triple product{1, 1, 1};
    if (!spec.only_diffusion) {
        for (const VdmStage& stage : spec.stages) {
            if (!stage.spconv) continue;
            product.z *= stage.spconv->stride.z;
            product.y *= stage.spconv->stride.y;
            product.x *= stage.spconv->stride.x;
        }
    }
    GridSpec g = in_grid;
    g.voxel_size_z *= product.z;
    g.voxel_size_y *= product.y;
    g.voxel_size_x *= product.x;
    g.shape = out_shape;
    return g;
}

PipelineStage make_vdm_stage(const PipelineModel& model) {
    // Copy the spec into the closure so the stage stays valid on its own.
    VdmSpec spec = model.vdm;
    return [spec](const SparseTensor& in, const GridSpec& grid) {
        StageResult result;
        result.tensor = vdm_forward(in, spec);
        result.grid = stage_output_grid(grid, spec, result.tensor.shape());
        return result;
    };
}

std::vector<Scene> generate_scenes(const RunConfig& cfg) {
    const GridSpec grid = effective_grid(cfg);
    Rng root(cfg.seed);
    std::vector<Scene> scenes;
    scenes.reserve(static_cast<std::size_t>(cfg.scene_count));
    for (std::int32_t i = 0; i < cfg.scene_count; ++i) {
        const std::uint64_t scene_seed = root.split(static_cast<std::uint64_t>(i)).seed();
        scenes.push_back(gen_scene(cfg.scene, grid, scene_seed));
    }
    return scenes;
}

namespace {

Matrix gather_rows(const Matrix& src, const std::vector<std::int32_t>& indices) {
    Matrix out(indices.size(), src.cols());
    for (std::size_t j = 0; j < indices.size(); ++j) {
        auto s = src.row(static_cast<std::size_t>(indices[j]));
        auto d = out.row(j);
        std::copy(s.begin(), s.end(), d.begin());
    }
    return out;
}

Matrix slice_rows(const Matrix& src, std::int32_t begin, std::int32_t end) {
    Matrix out(static_cast<std::size_t>(end - begin), src.cols());
    for (std::int32_t r = begin; r < end; ++r) {
        auto s = src.row(static_cast<std::size_t>(r));
        auto d = out.row(static_cast<std::size_t>(r - begin));
        std::copy(s.begin(), s.end(), d.begin());
    }
    return out;
}

void paste_rows(Matrix& dst, const Matrix& block, std::int32_t begin) {
    for (std::size_t r = 0; r < block.rows(); ++r) {
        auto s = block.row(r);
        auto d = dst.row(static_cast<std::size_t>(begin) + r);
        std::copy(s.begin(), s.end(), d.begin());
    }
}

SceneOutput process_scene(const RunConfig& cfg, const PipelineModel& model,
                          const GridSpec& grid, const Scene& scene) {
    SceneOutput out;
    const VoxelizeResult vox = voxelize(scene.points, grid);
    out.dropped_points = vox.dropped;
    out.counts.overall_before = vox.tensor.num_active();
    out.counts.foreground_before = count_foreground(vox.tensor, grid, scene.boxes);

    SparseTensor cur = vdm_forward(vox.tensor, model.vdm);
    const GridSpec out_grid = stage_output_grid(grid, model.vdm, cur.shape());
    out.counts.overall_after = cur.num_active();
    out.counts.foreground_after = count_foreground(cur, out_grid, scene.boxes);

    // One sequence block per serialization direction, alternating from the
    // configured starting order.
    const bool start_x = cfg.serialize_order == 'x';
    for (std::int32_t b = 0; b < cfg.seq_blocks; ++b) {
        const SerializeOrder order = (b % 2 == 0) == start_x
                                         ? SerializeOrder::x_major
                                         : SerializeOrder::y_major;
        const VoxelSequence seq = serialize(cur, order, cfg.group_size);
        Matrix m = gather_rows(cur.features(), seq.indices);
        for (const auto& [begin, end] : seq.groups) {
            Matrix group = slice_rows(m, begin, end);
            if (cfg.pipeline == PipelineKind::vdm_attn)
                group = attention(group, model.attn);
            else
                group = ssm_channelwise(group, model.ssm);
            paste_rows(m, group, begin);
        }
        cur = unserialize(seq, m, cur);
    }
    out.output = std::move(cur);
    return out;
}

} // namespace

RunResult run_pipeline(const RunConfig& cfg, const std::vector<Scene>& scenes,
                       int threads) {
    if (threads < 1) throw ConfigError("run_pipeline: threads must be >= 1");
    const PipelineModel model = build_model(cfg);
    const GridSpec grid = effective_grid(cfg);

    RunResult result;
    result.scenes.resize(scenes.size());
    std::vector<std::string> errors(scenes.size());

    // Scene-level parallelism with a slot per scene; aggregation below walks
    // the slots in index order, so the outcome is thread-count independent.
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= scenes.size()) return;
            try {
                result.scenes[i] = process_scene(cfg, model, grid, scenes[i]);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    if (threads == 1 || scenes.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const auto n = static_cast<std::size_t>(threads);
        pool.reserve(n);
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty())
            throw Error("scene " + std::to_string(i) + ": " + errors[i]);

    std::vector<FrameCounts> per_frame;
    per_frame.reserve(result.scenes.size());
    for (const SceneOutput& s : result.scenes) per_frame.push_back(s.counts);
    result.report = summarize(per_frame, to_string(cfg.pipeline));
    return result;
}

std::uint64_t tensor_digest(const SparseTensor& t) {
    std::uint64_t h = 1469598103934665603ULL; // FNV-1a 64
    auto mix_bytes = [&h](const void* data, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    };
    for (const VoxelCoord& c : t.coords()) mix_bytes(&c, sizeof c);
    mix_bytes(t.features().data().data(), t.features().data().size() * sizeof(double));
    return h;
}

std::string run_result_to_json(const RunConfig& cfg, const RunResult& result) {
    nlohmann::json j;
    j["pipeline"] = to_string(cfg.pipeline);
    j["seed"] = cfg.seed;
    j["frames"] = result.report.frames;
    j["group_size"] = cfg.group_size;
    j["seq_blocks"] = cfg.seq_blocks;
    j["report"]["frames"] = result.report.frames;
    j["report"]["overall_before"] = result.report.overall_before;
    j["report"]["overall_after"] = result.report.overall_after;
    j["report"]["foreground_before"] = result.report.foreground_before;
    j["report"]["foreground_after"] = result.report.foreground_after;
    j["report"]["stage"] = result.report.stage;
    auto& scenes = j["scenes"] = nlohmann::json::array();
    for (const SceneOutput& s : result.scenes) {
        char digest[32];
        std::snprintf(digest, sizeof digest, "%016llx",
                      static_cast<unsigned long long>(tensor_digest(s.output)));
        nlohmann::json sj;
        sj["active_in"] = s.counts.overall_before;
        sj["active_out"] = s.counts.overall_after;
        sj["foreground_in"] = s.counts.foreground_before;
        sj["foreground_out"] = s.counts.foreground_after;
        sj["dropped_points"] = s.dropped_points;
        sj["output_hash"] = digest;
        scenes.push_back(std::move(sj));
    }
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

namespace {

constexpr double kFdStep = 1e-5;

double sum_squared(const Matrix& m) {
    double acc = 0.0;
    for (double v : m.data()) acc += v * v;
    return acc;
}

// Relative error guarded against tiny denominators: effectively absolute
// error for gradients below 1.
double rel_err(double a, double b) {
    const double denom = std::max({1.0, std::abs(a), std::abs(b)});
    return std::abs(a - b) / denom;
}

struct FdSubject {
    std::string name;
    std::vector<ParamRef> params;
    std::function<double()> loss;
    std::function<std::vector<ParamBlock>()> analytic;
};

void run_subject(const FdSubject& subject, GradCheckReport& report) {
    const std::vector<ParamBlock> analytic = subject.analytic();
    if (analytic.size() != subject.params.size())
        throw Error("gradcheck: analytic block count mismatch in " + subject.name);

    for (std::size_t b = 0; b < subject.params.size(); ++b) {
        const ParamRef& ref = subject.params[b];
        if (analytic[b].name != ref.name || analytic[b].values.size() != ref.size)
            throw Error("gradcheck: block layout mismatch at " + ref.name);

        GradCheckEntry entry;
        entry.name = subject.name + "/" + ref.name;
        entry.count = ref.size;
        for (std::size_t i = 0; i < ref.size; ++i) {
            const double old = ref.data[i];
            ref.data[i] = old + kFdStep;
            const double lp = subject.loss();
            ref.data[i] = old - kFdStep;
            const double lm = subject.loss();
            ref.data[i] = old;
            const double fd = (lp - lm) / (2.0 * kFdStep);
            const double err = rel_err(analytic[b].values[i], fd);
            if (err > entry.max_rel_err) {
                entry.max_rel_err = err;
                entry.worst_param = ref.name + "[" + std::to_string(i) + "]";
            }
        }
        report.params_checked += entry.count;
        if (entry.max_rel_err > report.worst) {
            report.worst = entry.max_rel_err;
            report.worst_name = subject.name + "/" + entry.worst_param;
        }
        report.entries.push_back(std::move(entry));
    }
}

SparseTensor random_tensor(const Shape3& shape, std::size_t actives,
                           std::size_t channels, Rng& rng) {
    std::vector<std::int64_t> lins;
    const auto cells = static_cast<std::uint64_t>(shape.cells());
    while (lins.size() < actives) {
        const auto lin = static_cast<std::int64_t>(rng.uniform_index(cells));
        if (std::find(lins.begin(), lins.end(), lin) == lins.end())
            lins.push_back(lin);
    }
    std::sort(lins.begin(), lins.end());
    std::vector<VoxelCoord> coords;
    coords.reserve(lins.size());
    for (std::int64_t lin : lins)
        coords.push_back(VoxelCoord{
            static_cast<std::int32_t>(lin / (std::int64_t{shape.ny} * shape.nx)),
            static_cast<std::int32_t>((lin / shape.nx) % shape.ny),
            static_cast<std::int32_t>(lin % shape.nx)});
    Matrix features(coords.size(), channels);
    for (double& v : features.data()) v = rng.uniform(0.5, 1.5);
    return SparseTensor::from_sorted(std::move(coords), std::move(features), shape);
}

FdSubject conv_subject(const std::string& name, SparseTensor x,
                       ConvSpec spec) {
    auto x_ptr = std::make_shared<SparseTensor>(std::move(x));
    auto spec_ptr = std::make_shared<ConvSpec>(std::move(spec));
    auto rb = std::make_shared<Rulebook>(build_rulebook(*x_ptr, *spec_ptr));

    FdSubject subject;
    subject.name = name;
    subject.params = {
        {"w", spec_ptr->weights.data(), spec_ptr->weights.size()},
        {"b", spec_ptr->bias.data(), spec_ptr->bias.size()},
    };
    subject.loss = [x_ptr, spec_ptr, rb] {
        return sum_squared(conv_forward(*x_ptr, *spec_ptr, *rb).features());
    };
    subject.analytic = [x_ptr, spec_ptr, rb] {
        const SparseTensor out = conv_forward(*x_ptr, *spec_ptr, *rb);
        Matrix grad_out = out.features();
        for (double& v : grad_out.data()) v *= 2.0;
        ConvGrads g = conv_backward(*x_ptr, *spec_ptr, *rb, grad_out);
        std::vector<ParamBlock> blocks;
        blocks.push_back({"w", std::move(g.weights)});
        blocks.push_back({"b", std::move(g.bias)});
        return blocks;
    };
    return subject;
}

FdSubject vdm_subject(const std::string& name, SparseTensor x, VdmSpec spec) {
    auto x_ptr = std::make_shared<SparseTensor>(std::move(x));
    auto spec_ptr = std::make_shared<VdmSpec>(std::move(spec));

    FdSubject subject;
    subject.name = name;
    subject.params = vdm_parameters(*spec_ptr);
    subject.loss = [x_ptr, spec_ptr] {
        return sum_squared(vdm_forward(*x_ptr, *spec_ptr).features());
    };
    subject.analytic = [x_ptr, spec_ptr] {
        VdmTape tape;
        const SparseTensor out = vdm_forward_tape(*x_ptr, *spec_ptr, tape);
        Matrix grad_out = out.features();
        for (double& v : grad_out.data()) v *= 2.0;
        return vdm_backward(tape, *spec_ptr, grad_out).params;
    };
    return subject;
}

} // namespace

GradCheckReport gradcheck(const RunConfig& cfg, double tolerance) {
    if (!(tolerance > 0.0)) throw ConfigError("gradcheck: tolerance must be > 0");

    GradCheckReport report;
    Rng root(cfg.seed);

    // All subjects run on a 4x8x8 grid with a small random active set; widths
    // are kept tiny so the central-difference sweep touches every parameter
    // quickly.
    const Shape3 shape{4, 8, 8};

    {
        Rng r = root.split(101);
        SparseTensor x = random_tensor(shape, 12, 2, r);
        ConvSpec spec = make_regular_spec({3, 3, 3}, {1, 2, 2}, {1, 1, 1}, 2, 3);
        Rng wr = root.split(102);
        init_weights(spec, wr);
        run_subject(conv_subject("conv_regular", std::move(x), std::move(spec)), report);
    }
    {
        Rng r = root.split(103);
        SparseTensor x = random_tensor(shape, 12, 2, r);
        ConvSpec spec = make_submanifold_spec({3, 3, 3}, 2, 2);
        Rng wr = root.split(104);
        init_weights(spec, wr);
        run_subject(conv_subject("conv_submanifold", std::move(x), std::move(spec)),
                    report);
    }
    {
        // A single stage (subm + residual block, no trailing conv, no lift).
        Rng r = root.split(105);
        SparseTensor x = random_tensor(shape, 12, 2, r);
        VdmSpec spec;
        VdmStage stage;
        stage.subm = make_submanifold_spec({3, 3, 3}, 2, 3);
        stage.srb = make_srb_spec(3);
        spec.stages.push_back(std::move(stage));
        Rng wr = root.split(106);
        init_vdm_params(spec, wr);
        run_subject(vdm_subject("srb_stage", std::move(x), std::move(spec)), report);
    }
    {
        Rng r = root.split(107);
        SparseTensor x = random_tensor(shape, 12, 2, r);
        VdmSpec spec = make_vdm_spec(2, {3, 2, 3, 4}, cfg.z_stride, false);
        Rng wr = root.split(108);
        init_vdm_params(spec, wr);
        run_subject(vdm_subject("vdm_full", std::move(x), std::move(spec)), report);
    }
    {
        Rng r = root.split(109);
        SparseTensor x = random_tensor(shape, 12, 2, r);
        VdmSpec spec = make_vdm_spec(2, {3}, 1, true);
        Rng wr = root.split(110);
        init_vdm_params(spec, wr);
        run_subject(vdm_subject("vdm_only_diffusion", std::move(x), std::move(spec)),
                    report);
    }
    return report;
}

std::string gradcheck_to_json(const GradCheckReport& report, double tolerance) {
    nlohmann::json j;
    j["tolerance"] = tolerance;
    j["worst"] = report.worst;
    j["worst_param"] = report.worst_name;
    j["params_checked"] = report.params_checked;
    j["pass"] = report.pass(tolerance);
    auto& entries = j["entries"] = nlohmann::json::array();
    for (const GradCheckEntry& e : report.entries) {
        nlohmann::json ej;
        ej["name"] = e.name;
        ej["max_rel_err"] = e.max_rel_err;
        ej["worst_param"] = e.worst_param;
        ej["count"] = e.count;
        entries.push_back(std::move(ej));
    }
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Weight persistence
// ---------------------------------------------------------------------------

void dump_weights(const VdmSpec& spec, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::string manifest;
    if (!spec.lift.empty()) {
        write_weights_blob(dir + "/lift.vdmw", lift_as_conv(spec));
        manifest += "lift\n";
    }
    for (const auto& [name, conv] : vdm_layers(spec)) {
        write_weights_blob(dir + "/" + name + ".vdmw", *conv);
        manifest += name + "\n";
    }
    write_text_file(dir + "/manifest.txt", manifest);
}

void load_weights(VdmSpec& spec, const std::string& dir) {
    std::ifstream in(dir + "/manifest.txt");
    if (!in) throw IoError("cannot open manifest: " + dir + "/manifest.txt");
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
            line.pop_back();
        if (!line.empty()) names.push_back(line);
    }

    auto layers = vdm_layers_mutable(spec);
    std::vector<std::string> expected;
    if (!spec.lift.empty()) expected.push_back("lift");
    for (const auto& [name, conv] : layers) expected.push_back(name);
    if (names != expected)
        throw ConfigError("weight manifest does not match the configured stack");

    if (!spec.lift.empty()) {
        ConvSpec lift = lift_as_conv(spec);
        read_weights_blob(dir + "/lift.vdmw", lift);
        set_lift_from_conv(spec, lift);
    }
    for (auto& [name, conv] : layers)
        read_weights_blob(dir + "/" + name + ".vdmw", *conv);
}

} // namespace vdm
