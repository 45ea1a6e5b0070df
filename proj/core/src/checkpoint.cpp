#include <bit>
#include <cstring>
#include <fstream>

#include "mdmlp/errors.hpp"
#include "mdmlp/model.hpp"

namespace mdmlp {

namespace {

constexpr char kMagic[8] = {'M', 'D', 'L', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(b, 8);
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

} // namespace

void save_checkpoint(const std::string& path, const std::string& config_echo,
                     const ModelParams& params) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, sizeof(kMagic));
    put_u32(os, kVersion);
    put_u64(os, config_echo.size());
    os.write(config_echo.data(), static_cast<std::streamsize>(config_echo.size()));

    const auto entries = params.entries();
    put_u32(os, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, t] : entries) {
        put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, static_cast<std::uint32_t>(t->rank()));
        for (auto d : t->shape()) put_u64(os, static_cast<std::uint64_t>(d));
        for (double v : t->data()) put_f64(os, v);
    }
    if (!os) throw DataError("write failed for checkpoint: " + path);
    os.close();

    std::ofstream side(path + ".txt", std::ios::trunc);
    if (!side) throw DataError("cannot open checkpoint sidecar for writing: " + path + ".txt");
    std::int64_t total = 0;
    for (const auto& [name, t] : entries) {
        side << name << " " << shape_str(t->shape()) << " " << t->size() << "\n";
        total += t->size();
    }
    side << "total " << total << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw DataError("not a checkpoint file: " + path);
    const auto version = get_u32(is);
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));

    Checkpoint out;
    const auto echo_len = get_u64(is);
    out.config_echo.resize(echo_len);
    is.read(out.config_echo.data(), static_cast<std::streamsize>(echo_len));

    const auto count = get_u32(is);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = get_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const auto rank = get_u32(is);
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<std::int64_t>(get_u64(is));
        Tensor t = Tensor::zeros(shape);
        for (auto& v : t.mut()) v = get_f64(is);
        if (!is) throw DataError("truncated checkpoint: " + path);
        out.tensors.emplace_back(std::move(name), std::move(t));
    }
    return out;
}

ModelParams params_from_checkpoint(const Checkpoint& ckpt, const ModelConfig& cfg) {
    Rng dummy(0);
    ModelParams p = init_params(cfg, dummy);
    auto entries = p.entries();
    if (entries.size() != ckpt.tensors.size())
        throw DataError("checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                        " tensors, config expects " + std::to_string(entries.size()));
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& [want_name, slot] = entries[i];
        const auto& [got_name, tensor] = ckpt.tensors[i];
        if (want_name != got_name)
            throw DataError("checkpoint tensor '" + got_name + "' where '" + want_name +
                            "' was expected");
        if (tensor.shape() != slot->shape())
            throw DataError("checkpoint tensor '" + got_name + "' has shape " +
                            shape_str(tensor.shape()) + ", expected " + shape_str(slot->shape()));
        *slot = tensor.clone();
    }
    return p;
}

} // namespace mdmlp
