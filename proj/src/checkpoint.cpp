#include "fas/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fas {

namespace {
constexpr char kMagic[8] = {'F', 'A', 'S', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = (v >> (8 * i)) & 0xff;
    out.write(reinterpret_cast<const char*>(buf), 8);
}
std::uint64_t read_u64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[i]) << (8 * i);
    return v;
}
}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    nlohmann::json meta = ckpt.meta;
    meta["format_version"] = ckpt.format_version;
    nlohmann::json table = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : ckpt.tensors) {
        table.push_back({{"name", name}, {"shape", t.shape}, {"offset", offset}});
        offset += t.numel() * sizeof(float);
    }
    meta["tensors"] = table;
    const std::string meta_str = meta.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kMagic, 8);
    write_u64(out, meta_str.size());
    out.write(meta_str.data(), std::streamsize(meta_str.size()));
    for (const auto& [name, t] : ckpt.tensors)
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  std::streamsize(t.numel() * sizeof(float)));
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error(path + ": not a checkpoint file");
    const std::uint64_t meta_len = read_u64(in);
    std::string meta_str(meta_len, '\0');
    in.read(meta_str.data(), std::streamsize(meta_len));
    Checkpoint ckpt;
    ckpt.meta = nlohmann::json::parse(meta_str);
    ckpt.format_version = ckpt.meta.value("format_version", 1);
    if (ckpt.format_version != 1)
        throw std::runtime_error(path + ": unsupported checkpoint format version " +
                                 std::to_string(ckpt.format_version));
    for (const auto& entry : ckpt.meta["tensors"]) {
        const std::string name = entry["name"].get<std::string>();
        std::vector<std::size_t> shape = entry["shape"].get<std::vector<std::size_t>>();
        Tensor<float> t(shape);
        in.read(reinterpret_cast<char*>(t.data.data()),
                std::streamsize(t.numel() * sizeof(float)));
        if (std::size_t(in.gcount()) != t.numel() * sizeof(float))
            throw std::runtime_error(path + ": truncated tensor payload for " + name);
        ckpt.tensors.emplace(name, std::move(t));
    }
    ckpt.meta.erase("tensors");
    return ckpt;
}

}  // namespace fas
