#include "vdm/blocks.hpp"

#include <algorithm>
#include <cmath>

#include "vdm/errors.hpp"

namespace vdm {

namespace {

Matrix relu(const Matrix& m) {
    Matrix out = m;
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return out;
}

// Backward through relu: keep gradient where the pre-activation was > 0.
Matrix relu_backward(const Matrix& pre, const Matrix& grad) {
    Matrix out = grad;
    for (std::size_t i = 0; i < out.data().size(); ++i)
        if (!(pre.data()[i] > 0.0)) out.data()[i] = 0.0;
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    Matrix out = a;
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += b.data()[i];
    return out;
}

std::string stage_name(std::size_t i) {
    return "stage" + std::to_string(i + 1);
}

} // namespace

SrbSpec make_srb_spec(std::int32_t channels) {
    SrbSpec spec;
    spec.channels = channels;
    spec.conv1 = make_submanifold_spec({3, 3, 3}, channels, channels);
    spec.conv2 = make_submanifold_spec({3, 3, 3}, channels, channels);
    return spec;
}

void validate_srb_spec(const SrbSpec& spec) {
    if (spec.channels < 1) throw ConfigError("srb: channels must be positive");
    validate_conv_spec(spec.conv1);
    validate_conv_spec(spec.conv2);
    if (spec.conv1.mode != ConvMode::submanifold ||
        spec.conv2.mode != ConvMode::submanifold)
        throw ConfigError("srb: both convolutions must be submanifold");
    if (spec.conv1.in_channels != spec.channels ||
        spec.conv2.out_channels != spec.channels)
        throw ConfigError("srb: residual add requires matching widths");
    if (spec.conv1.out_channels != spec.conv2.in_channels)
        throw ConfigError("srb: conv1 output width must feed conv2");
}

SparseTensor srb_forward(const SparseTensor& in, const SrbSpec& spec) {
    validate_srb_spec(spec);
    if (in.channels() != static_cast<std::size_t>(spec.channels))
        throw DimensionError("srb_forward: channel mismatch");
    const SparseTensor h1 = conv(in, spec.conv1);
    const SparseTensor h2 = conv(in.with_features(relu(h1.features())), spec.conv2);
    return in.with_features(relu(add(in.features(), h2.features())));
}

VdmSpec make_vdm_spec(std::int32_t raw_channels,
                      const std::vector<std::int32_t>& channel_plan,
                      std::int32_t z_stride, bool only_diffusion) {
    if (channel_plan.empty())
        throw ConfigError("vdm: channel plan must list at least one width");
    if (z_stride < 1) throw ConfigError("vdm: z stride must be positive");

    VdmSpec spec;
    const std::int32_t lifted = channel_plan.front();
    if (raw_channels > 0)
        spec.lift = Matrix(static_cast<std::size_t>(raw_channels),
                           static_cast<std::size_t>(lifted));

    if (only_diffusion) {
        spec.only_diffusion = true;
        spec.diffusion =
            make_regular_spec({3, 3, 3}, {1, 1, 1}, {1, 1, 1}, lifted, lifted);
        return spec;
    }

    for (std::size_t i = 0; i + 1 < channel_plan.size(); ++i) {
        const std::int32_t w_in = channel_plan[i];
        const std::int32_t w_out = channel_plan[i + 1];
        VdmStage stage;
        stage.subm = make_submanifold_spec({3, 3, 3}, w_in, w_out);
        stage.srb = make_srb_spec(w_out);
        const Triple stride = i < 2 ? Triple{z_stride, 2, 2} : Triple{1, 1, 1};
        stage.spconv = make_regular_spec({3, 3, 3}, stride, {1, 1, 1}, w_out, w_out);
        spec.stages.push_back(std::move(stage));
    }
    return spec;
}

void init_vdm_params(VdmSpec& spec, Rng& rng) {
    std::uint64_t layer = 0;
    if (!spec.lift.empty()) {
        Rng r = rng.split(layer++);
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.lift.rows()));
        for (double& v : spec.lift.data()) v = r.uniform(-bound, bound);
    }
    for (auto& [name, conv] : vdm_layers_mutable(spec)) {
        Rng r = rng.split(layer++);
        init_weights(*conv, r);
    }
}

void validate_vdm_spec(const VdmSpec& spec) {
    std::int32_t width = -1;
    if (!spec.lift.empty()) width = static_cast<std::int32_t>(spec.lift.cols());

    if (spec.only_diffusion) {
        validate_conv_spec(spec.diffusion);
        if (spec.diffusion.mode != ConvMode::regular)
            throw ConfigError("vdm: only-diffusion layer must be a regular conv");
        if (spec.diffusion.stride != Triple{1, 1, 1})
            throw ConfigError("vdm: only-diffusion layer must have stride 1");
        if (width >= 0 && spec.diffusion.in_channels != width)
            throw ConfigError("vdm: only-diffusion width does not match the lift");
        return;
    }

    for (const VdmStage& stage : spec.stages) {
        validate_conv_spec(stage.subm);
        if (stage.subm.mode != ConvMode::submanifold)
            throw ConfigError("vdm: stage entry conv must be submanifold");
        if (width >= 0 && stage.subm.in_channels != width)
            throw ConfigError("vdm: stage input width breaks the channel chain");
        validate_srb_spec(stage.srb);
        if (stage.srb.channels != stage.subm.out_channels)
            throw ConfigError("vdm: residual block width must match the stage width");
        width = stage.subm.out_channels;
        if (stage.spconv) {
            validate_conv_spec(*stage.spconv);
            if (stage.spconv->mode != ConvMode::regular)
                throw ConfigError("vdm: trailing conv must be a regular conv");
            if (stage.spconv->in_channels != width)
                throw ConfigError("vdm: trailing conv width mismatch");
            width = stage.spconv->out_channels;
        }
    }
}

void validate_full_vdm(const VdmSpec& spec) {
    validate_vdm_spec(spec);
    if (spec.only_diffusion) return;
    int downs = 0;
    for (const VdmStage& stage : spec.stages) {
        if (!stage.spconv) continue;
        const Triple s = stage.spconv->stride;
        if (s.y == 2 && s.x == 2)
            ++downs;
        else if (s.y != 1 || s.x != 1)
            throw ConfigError("vdm: trailing conv stride must be 1 or 2 in y and x");
    }
    if (downs != 2)
        throw ConfigError("vdm: full mode requires exactly two stride-2 stages");
}

namespace {

// Runs the stack, filling the tape as it goes.
SparseTensor run_forward(const SparseTensor& in, const VdmSpec& spec, VdmTape& tape) {
    validate_vdm_spec(spec);

    SparseTensor x = in;
    tape.lifted = false;
    if (!spec.lift.empty() && in.channels() == spec.lift.rows()) {
        tape.lifted = true;
        tape.lift_in = in.features();
        x = in.with_features(matmul(in.features(), spec.lift));
    } else {
        const std::size_t expect =
            spec.only_diffusion
                ? static_cast<std::size_t>(spec.diffusion.in_channels)
                : (spec.stages.empty()
                       ? in.channels()
                       : static_cast<std::size_t>(spec.stages.front().subm.in_channels));
        if (in.channels() != expect)
            throw DimensionError("vdm_forward: input has " +
                                 std::to_string(in.channels()) +
                                 " channels, expected the lift width or " +
                                 std::to_string(expect));
    }

    if (spec.only_diffusion) {
        tape.diffusion.input = x;
        tape.diffusion.rb = build_rulebook(x, spec.diffusion);
        tape.output = conv_forward(x, spec.diffusion, tape.diffusion.rb);
        return tape.output;
    }

    for (const VdmStage& stage : spec.stages) {
        StageTape st;
        st.subm.input = x;
        st.subm.rb = build_rulebook(x, stage.subm);
        SparseTensor y = conv_forward(x, stage.subm, st.subm.rb);
        st.subm_pre = y.features();
        x = y.with_features(relu(y.features()));

        st.srb.c1.input = x;
        st.srb.c1.rb = build_rulebook(x, stage.srb.conv1);
        const SparseTensor h1 = conv_forward(x, stage.srb.conv1, st.srb.c1.rb);
        st.srb.h1_pre = h1.features();
        st.srb.c2.input = x.with_features(relu(h1.features()));
        st.srb.c2.rb = build_rulebook(st.srb.c2.input, stage.srb.conv2);
        const SparseTensor h2 = conv_forward(st.srb.c2.input, stage.srb.conv2, st.srb.c2.rb);
        st.srb.sum_pre = add(x.features(), h2.features());
        x = x.with_features(relu(st.srb.sum_pre));

        if (stage.spconv) {
            st.has_spconv = true;
            st.spconv.input = x;
            st.spconv.rb = build_rulebook(x, *stage.spconv);
            const SparseTensor z = conv_forward(x, *stage.spconv, st.spconv.rb);
            st.spconv_pre = z.features();
            x = z.with_features(relu(z.features()));
        }
        tape.stages.push_back(std::move(st));
    }
    tape.output = x;
    return x;
}

} // namespace

SparseTensor vdm_forward(const SparseTensor& in, const VdmSpec& spec) {
    VdmTape tape;
    return run_forward(in, spec, tape);
}

SparseTensor vdm_forward_tape(const SparseTensor& in, const VdmSpec& spec,
                              VdmTape& tape) {
    tape = VdmTape{};
    return run_forward(in, spec, tape);
}

VdmGrads vdm_backward(const VdmTape& tape, const VdmSpec& spec,
                      const Matrix& grad_out) {
    if (grad_out.rows() != tape.output.num_active() ||
        grad_out.cols() != tape.output.channels())
        throw DimensionError("vdm_backward: grad_out does not match forward output");

    VdmGrads grads;
    // Parameter blocks are collected stage-by-stage while walking backwards,
    // then reversed into execution order at the end.
    std::vector<ParamBlock> rev;
    Matrix g = grad_out;

    auto conv_step = [&](const ConvTapeEntry& entry, const ConvSpec& layer,
                         const std::string& name, Matrix grad) {
        ConvGrads cg = conv_backward(entry.input, layer, entry.rb, grad);
        rev.push_back({name + ".b", std::move(cg.bias)});
        rev.push_back({name + ".w", std::move(cg.weights)});
        return std::move(cg.input);
    };

    if (spec.only_diffusion) {
        g = conv_step(tape.diffusion, spec.diffusion, "diffusion", std::move(g));
    } else {
        for (std::size_t si = tape.stages.size(); si-- > 0;) {
            const StageTape& st = tape.stages[si];
            const VdmStage& stage = spec.stages[si];
            const std::string base = stage_name(si);

            if (st.has_spconv) {
                g = relu_backward(st.spconv_pre, g);
                g = conv_step(st.spconv, *stage.spconv, base + ".spconv", std::move(g));
            }

            // Residual block: the post-add relu gradient feeds both the skip
            // path and the conv2 -> relu -> conv1 branch.
            const Matrix g_sum = relu_backward(st.srb.sum_pre, g);
            Matrix g_branch =
                conv_step(st.srb.c2, stage.srb.conv2, base + ".srb2", g_sum);
            g_branch = relu_backward(st.srb.h1_pre, g_branch);
            g_branch = conv_step(st.srb.c1, stage.srb.conv1, base + ".srb1",
                                 std::move(g_branch));
            g = add(g_sum, g_branch);

            g = relu_backward(st.subm_pre, g);
            g = conv_step(st.subm, stage.subm, base + ".subm", std::move(g));
        }
    }

    if (tape.lifted) {
        // d/dW of (X W): X^T G, accumulated over rows in increasing order.
        Matrix lift_grad(spec.lift.rows(), spec.lift.cols());
        for (std::size_t r = 0; r < spec.lift.rows(); ++r)
            for (std::size_t c = 0; c < spec.lift.cols(); ++c) {
                double acc = 0.0;
                for (std::size_t row = 0; row < tape.lift_in.rows(); ++row)
                    acc += tape.lift_in.at(row, r) * g.at(row, c);
                lift_grad.at(r, c) = acc;
            }
        rev.push_back({"lift.w", std::move(lift_grad.data())});
        g = matmul(g, transpose(spec.lift));
    }

    std::reverse(rev.begin(), rev.end());
    grads.params = std::move(rev);
    grads.input = std::move(g);
    return grads;
}

std::vector<ParamRef> vdm_parameters(VdmSpec& spec) {
    std::vector<ParamRef> refs;
    if (!spec.lift.empty())
        refs.push_back({"lift.w", spec.lift.data().data(), spec.lift.data().size()});
    for (auto& [name, conv] : vdm_layers_mutable(spec)) {
        refs.push_back({name + ".w", conv->weights.data(), conv->weights.size()});
        refs.push_back({name + ".b", conv->bias.data(), conv->bias.size()});
    }
    return refs;
}

std::vector<std::pair<std::string, ConvSpec*>> vdm_layers_mutable(VdmSpec& spec) {
    std::vector<std::pair<std::string, ConvSpec*>> layers;
    if (spec.only_diffusion) {
        layers.emplace_back("diffusion", &spec.diffusion);
        return layers;
    }
    for (std::size_t i = 0; i < spec.stages.size(); ++i) {
        VdmStage& stage = spec.stages[i];
        const std::string base = stage_name(i);
        layers.emplace_back(base + ".subm", &stage.subm);
        layers.emplace_back(base + ".srb1", &stage.srb.conv1);
        layers.emplace_back(base + ".srb2", &stage.srb.conv2);
        if (stage.spconv) layers.emplace_back(base + ".spconv", &*stage.spconv);
    }
    return layers;
}

std::vector<std::pair<std::string, const ConvSpec*>> vdm_layers(const VdmSpec& spec) {
    std::vector<std::pair<std::string, const ConvSpec*>> layers;
    for (auto& [name, conv] : vdm_layers_mutable(const_cast<VdmSpec&>(spec)))
        layers.emplace_back(name, conv);
    return layers;
}

ConvSpec lift_as_conv(const VdmSpec& spec) {
    if (spec.lift.empty()) throw ConfigError("vdm: spec has no lift");
    ConvSpec conv = make_submanifold_spec({1, 1, 1},
                                          static_cast<std::int32_t>(spec.lift.rows()),
                                          static_cast<std::int32_t>(spec.lift.cols()));
    conv.weights = spec.lift.data();
    return conv;
}

void set_lift_from_conv(VdmSpec& spec, const ConvSpec& conv) {
    if (spec.lift.empty()) throw ConfigError("vdm: spec has no lift");
    if (conv.weights.size() != spec.lift.data().size())
        throw DimensionError("vdm: lift blob size mismatch");
    spec.lift.data() = conv.weights;
}

} // namespace vdm
