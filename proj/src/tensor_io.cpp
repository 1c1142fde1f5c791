#include "advdet/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace advdet {

namespace {
constexpr char kMagic[8] = {'A', 'D', 'V', 'T', 'E', 'N', 'S', 'R'};
constexpr uint32_t kVersion = 1;

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
    throw std::runtime_error("tensor file " + path.string() + ": " + what);
}
} // namespace

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
    if (!t.defined()) fail(path, "cannot save undefined tensor");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(path, "cannot open for writing");
    f.write(kMagic, 8);
    uint32_t v = kVersion, reserved = 0;
    f.write(reinterpret_cast<const char*>(&v), 4);
    f.write(reinterpret_cast<const char*>(&reserved), 4);
    const uint32_t rank = static_cast<uint32_t>(t.rank());
    f.write(reinterpret_cast<const char*>(&rank), 4);
    for (int e : t.shape()) {
        const uint32_t ext = static_cast<uint32_t>(e);
        f.write(reinterpret_cast<const char*>(&ext), 4);
    }
    f.write(reinterpret_cast<const char*>(t.data().data()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!f) fail(path, "write failed");
}

Tensor load_tensor(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(path, "cannot open");
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0) fail(path, "bad magic");
    uint32_t version = 0, reserved = 0, rank = 0;
    f.read(reinterpret_cast<char*>(&version), 4);
    f.read(reinterpret_cast<char*>(&reserved), 4);
    if (!f || version != kVersion) fail(path, "unsupported version " + std::to_string(version));
    f.read(reinterpret_cast<char*>(&rank), 4);
    if (!f || rank > 8) fail(path, "implausible rank " + std::to_string(rank));
    Shape shape(rank);
    for (uint32_t d = 0; d < rank; ++d) {
        uint32_t ext = 0;
        f.read(reinterpret_cast<char*>(&ext), 4);
        if (!f) fail(path, "truncated header");
        shape[d] = static_cast<int>(ext);
    }
    Tensor t = Tensor::zeros(shape);
    f.read(reinterpret_cast<char*>(t.data().data()),
           static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!f) fail(path, "truncated payload");
    char extra;
    if (f.read(&extra, 1)) fail(path, "trailing bytes after payload");
    return t;
}

} // namespace advdet
