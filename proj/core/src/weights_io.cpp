#include "vdm/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "vdm/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "weight blobs are little-endian; byteswap support is not wired up");

namespace vdm {

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::ifstream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

} // namespace

void write_weights_blob(const std::string& path, const ConvSpec& spec) {
    validate_conv_spec(spec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + path);
    out.write("VDMW", 4);
    put_u32(out, kWeightsBlobVersion);
    put_u32(out, static_cast<std::uint32_t>(spec.kernel.z));
    put_u32(out, static_cast<std::uint32_t>(spec.kernel.y));
    put_u32(out, static_cast<std::uint32_t>(spec.kernel.x));
    put_u32(out, static_cast<std::uint32_t>(spec.in_channels));
    put_u32(out, static_cast<std::uint32_t>(spec.out_channels));
    out.write(reinterpret_cast<const char*>(spec.weights.data()),
              static_cast<std::streamsize>(spec.weights.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(spec.bias.data()),
              static_cast<std::streamsize>(spec.bias.size() * sizeof(double)));
    if (!out) throw IoError("short write: " + path);
}

void read_weights_blob(const std::string& path, ConvSpec& spec) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for read: " + path);
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "VDMW", 4) != 0)
        throw IoError("bad magic in weight blob: " + path);
    const std::uint32_t version = get_u32(in);
    if (version != kWeightsBlobVersion)
        throw IoError("unsupported weight blob version in " + path);
    const auto kz = static_cast<std::int32_t>(get_u32(in));
    const auto ky = static_cast<std::int32_t>(get_u32(in));
    const auto kx = static_cast<std::int32_t>(get_u32(in));
    const auto cin = static_cast<std::int32_t>(get_u32(in));
    const auto cout = static_cast<std::int32_t>(get_u32(in));
    if (Triple{kz, ky, kx} != spec.kernel || cin != spec.in_channels ||
        cout != spec.out_channels)
        throw ConfigError("weight blob geometry does not match layer: " + path);
    in.read(reinterpret_cast<char*>(spec.weights.data()),
            static_cast<std::streamsize>(spec.weights.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(spec.bias.data()),
            static_cast<std::streamsize>(spec.bias.size() * sizeof(double)));
    if (!in) throw IoError("short read: " + path);
}

} // namespace vdm
