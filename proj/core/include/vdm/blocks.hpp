#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vdm/sparse_conv.hpp"

namespace vdm {

// Sparse residual block: two submanifold k3 convolutions with a skip
// connection, out = relu(in + conv2(relu(conv1(in)))). Active set and shape
// never change.
struct SrbSpec {
    std::int32_t channels = 0;
    ConvSpec conv1; // submanifold k3, channels -> channels
    ConvSpec conv2; // submanifold k3, channels -> channels
};

SrbSpec make_srb_spec(std::int32_t channels);
void validate_srb_spec(const SrbSpec& spec);

SparseTensor srb_forward(const SparseTensor& in, const SrbSpec& spec);

// One stage of the diffusion stack: a submanifold conv carrying the stage's
// width change, a residual block at that width, and an optional trailing
// regular conv (the diffusion layer; stride-2 in the two downsampling stages,
// stride-1 otherwise).
struct VdmStage {
    ConvSpec subm;
    SrbSpec srb;
    std::optional<ConvSpec> spconv;
};

// Full voxel-diffusion stack. In full mode the input is lifted to the first
// plan width and run through the stages; in only-diffusion mode the lifted
// input goes through a single stride-1 regular k3 convolution instead.
struct VdmSpec {
    Matrix lift; // raw_channels x first plan width, bias-free; empty = no lift
    std::vector<VdmStage> stages;
    bool only_diffusion = false;
    ConvSpec diffusion; // used only when only_diffusion
};

/// Builds the stack for a width chain (e.g. {64, 32, 64, 128} gives stages
/// 64->32, 32->64, 64->128). The first two stages carry stride-(z_stride,2,2)
/// trailing convs, later stages stride-1 ones. Weights start at zero;
/// call init_vdm_params. only_diffusion replaces the stages with one regular
/// k3/s1/p1 conv at the lifted width.
VdmSpec make_vdm_spec(std::int32_t raw_channels,
                      const std::vector<std::int32_t>& channel_plan,
                      std::int32_t z_stride, bool only_diffusion);

/// Seeds every layer (and the lift) with uniform +-1/sqrt(fan_in) weights.
/// Layer k draws from rng.split(k) in execution order, so parameters do not
/// depend on how the generator was consumed elsewhere.
void init_vdm_params(VdmSpec& spec, Rng& rng);

/// Structural validation: per-conv validity plus width chaining.
void validate_vdm_spec(const VdmSpec& spec);

/// Additional full-mode contract used by run configs: exactly two stages carry
/// a stride-2 (y, x) trailing conv and all other trailing convs are stride-1.
void validate_full_vdm(const VdmSpec& spec);

SparseTensor vdm_forward(const SparseTensor& in, const VdmSpec& spec);

// Forward intermediates retained for the backward pass.
struct ConvTapeEntry {
    SparseTensor input;
    Rulebook rb;
};

struct SrbTape {
    ConvTapeEntry c1;
    Matrix h1_pre; // conv1 output before relu
    ConvTapeEntry c2;
    Matrix sum_pre; // skip + conv2 output before relu
};

struct StageTape {
    ConvTapeEntry subm;
    Matrix subm_pre;
    SrbTape srb;
    bool has_spconv = false;
    ConvTapeEntry spconv;
    Matrix spconv_pre;
};

struct VdmTape {
    bool lifted = false;
    Matrix lift_in; // raw features when lifted
    std::vector<StageTape> stages;
    ConvTapeEntry diffusion; // only-diffusion mode
    SparseTensor output;
};

SparseTensor vdm_forward_tape(const SparseTensor& in, const VdmSpec& spec,
                              VdmTape& tape);

/// One named flat parameter-gradient block; order matches vdm_parameters().
struct ParamBlock {
    std::string name;
    std::vector<double> values;
};

struct VdmGrads {
    Matrix input; // gradient w.r.t. the (pre-lift) input features
    std::vector<ParamBlock> params;
};

/// Reverse-mode sweep through the taped forward. grad_out must match the
/// forward output geometry.
VdmGrads vdm_backward(const VdmTape& tape, const VdmSpec& spec,
                      const Matrix& grad_out);

/// Mutable views of every trainable scalar block, in the same order as
/// VdmGrads::params ("lift.w", "stage1.subm.w", "stage1.subm.b", ...).
struct ParamRef {
    std::string name;
    double* data = nullptr;
    std::size_t size = 0;
};
std::vector<ParamRef> vdm_parameters(VdmSpec& spec);

/// Conv layers in execution order (lift excluded), e.g. for weight blobs.
std::vector<std::pair<std::string, const ConvSpec*>> vdm_layers(const VdmSpec& spec);
std::vector<std::pair<std::string, ConvSpec*>> vdm_layers_mutable(VdmSpec& spec);

/// The lift wrapped as a 1x1x1 submanifold conv, for blob serialization.
ConvSpec lift_as_conv(const VdmSpec& spec);
/// Writes a blob-shaped lift back into the spec.
void set_lift_from_conv(VdmSpec& spec, const ConvSpec& conv);

} // namespace vdm
