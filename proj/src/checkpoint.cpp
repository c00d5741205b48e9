#include "airm/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "airm/common.hpp"

namespace airm::ckpt {

namespace {
constexpr char kMagic[8] = {'A', 'I', 'R', 'M', 'C', 'K', 'P', 'T'};

template <typename V>
void write_pod(std::ostream& os, const V& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::istream& is) {
    V v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!is) throw IoError("checkpoint: truncated file");
    return v;
}
}  // namespace

void save(const Checkpoint& c, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("checkpoint: cannot write " + path);
    os.write(kMagic, sizeof(kMagic));
    write_pod(os, c.version);
    write_pod(os, c.iteration);
    write_pod(os, uint64_t(c.config_text.size()));
    os.write(c.config_text.data(), std::streamsize(c.config_text.size()));
    write_pod(os, uint32_t(c.tensors.size()));
    for (const auto& [name, t] : c.tensors) {
        write_pod(os, uint16_t(name.size()));
        os.write(name.data(), std::streamsize(name.size()));
        write_pod(os, uint8_t(0));  // dtype 0 = float32
        write_pod(os, uint8_t(t.ndim()));
        for (int d = 0; d < t.ndim(); ++d) write_pod(os, uint32_t(t.dim(d)));
        os.write(reinterpret_cast<const char*>(t.data()),
                 std::streamsize(sizeof(float) * size_t(t.numel())));
    }
    if (!os) throw IoError("checkpoint: write failed for " + path);
}

Checkpoint load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("checkpoint: bad magic in " + path);
    Checkpoint c;
    c.version = read_pod<uint32_t>(is);
    if (c.version != 1)
        throw IoError("checkpoint: unsupported version " +
                      std::to_string(c.version));
    c.iteration = read_pod<uint64_t>(is);
    const uint64_t cfg_len = read_pod<uint64_t>(is);
    c.config_text.resize(size_t(cfg_len));
    is.read(c.config_text.data(), std::streamsize(cfg_len));
    const uint32_t count = read_pod<uint32_t>(is);
    for (uint32_t i = 0; i < count; ++i) {
        const uint16_t name_len = read_pod<uint16_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const uint8_t dtype = read_pod<uint8_t>(is);
        if (dtype != 0) throw IoError("checkpoint: unsupported dtype");
        const uint8_t ndim = read_pod<uint8_t>(is);
        std::vector<int> shape;
        for (uint8_t d = 0; d < ndim; ++d)
            shape.push_back(int(read_pod<uint32_t>(is)));
        TensorF t(shape);
        is.read(reinterpret_cast<char*>(t.data()),
                std::streamsize(sizeof(float) * size_t(t.numel())));
        if (!is) throw IoError("checkpoint: truncated tensor data in " + path);
        c.tensors.emplace_back(std::move(name), std::move(t));
    }
    return c;
}

}  // namespace airm::ckpt
