#include "hmlet/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace hmlet {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'H', 'M', 'L', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

void put_f64s(std::ostream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void get_f64s(std::istream& in, std::vector<double>& v) {
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

} // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(params.num_users));
    put_u32(out, static_cast<std::uint32_t>(params.num_items));
    put_u32(out, static_cast<std::uint32_t>(params.dim));
    put_u32(out, static_cast<std::uint32_t>(kNumLayers));
    const std::uint8_t tag = static_cast<std::uint8_t>(params.variant);
    const std::uint8_t hidden = params.mlp_hidden ? 1 : 0;
    out.write(reinterpret_cast<const char*>(&tag), 1);
    out.write(reinterpret_cast<const char*>(&hidden), 1);
    put_f64s(out, params.embeddings.data);
    for (const auto& mlp : params.gating) {
        put_f64s(out, mlp.w1.data);
        put_f64s(out, mlp.b1);
        if (mlp.hidden) {
            put_f64s(out, mlp.w2.data);
            put_f64s(out, mlp.b2);
        }
    }
    if (!out) throw std::runtime_error("failed while writing checkpoint " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error(path + " is not a checkpoint (bad magic)");
    }
    const std::uint32_t version = get_u32(in);
    if (version != kVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    ModelParams p;
    p.num_users = get_u32(in);
    p.num_items = get_u32(in);
    p.dim = get_u32(in);
    const std::uint32_t layers = get_u32(in);
    if (layers != kNumLayers) {
        throw std::runtime_error("checkpoint has " + std::to_string(layers) +
                                 " layers, expected " + std::to_string(kNumLayers));
    }
    std::uint8_t tag = 0, hidden = 0;
    in.read(reinterpret_cast<char*>(&tag), 1);
    in.read(reinterpret_cast<char*>(&hidden), 1);
    if (tag > static_cast<std::uint8_t>(Variant::ForcedNonlinear)) {
        throw std::runtime_error("checkpoint has unknown variant tag " + std::to_string(tag));
    }
    p.variant = static_cast<Variant>(tag);
    p.mlp_hidden = hidden != 0;

    p.embeddings = DenseMatrix(p.num_users + p.num_items, p.dim);
    get_f64s(in, p.embeddings.data);

    const VariantSpec spec = layer_plan(p.variant);
    p.gating.resize(spec.num_gated_layers());
    for (auto& mlp : p.gating) {
        mlp.hidden = p.mlp_hidden;
        if (p.mlp_hidden) {
            mlp.w1 = DenseMatrix(2 * p.dim, p.dim);
            mlp.b1.resize(p.dim);
            mlp.w2 = DenseMatrix(p.dim, 2);
            mlp.b2.resize(2);
            get_f64s(in, mlp.w1.data);
            get_f64s(in, mlp.b1);
            get_f64s(in, mlp.w2.data);
            get_f64s(in, mlp.b2);
        } else {
            mlp.w1 = DenseMatrix(2 * p.dim, 2);
            mlp.b1.resize(2);
            get_f64s(in, mlp.w1.data);
            get_f64s(in, mlp.b1);
        }
    }
    if (!in) throw std::runtime_error("checkpoint " + path + " is truncated");
    return p;
}

} // namespace hmlet
