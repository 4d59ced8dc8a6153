#include "latkit/core/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

#include <openssl/evp.h>

#include "latkit/core/errors.hpp"

namespace latkit {

namespace {

constexpr char kMagic[8] = {'L', 'K', 'C', 'K', 'P', 'T', '0', '\n'};

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

void write_bytes(std::FILE* f, const void* p, size_t n, const std::string& path) {
    if (std::fwrite(p, 1, n, f) != n) throw IoError("short write: " + path);
}

void read_bytes(std::FILE* f, void* p, size_t n, const std::string& path) {
    if (std::fread(p, 1, n, f) != n) throw IoError("short read: " + path);
}

template <typename T>
void write_pod(std::FILE* f, T v, const std::string& path) {
    write_bytes(f, &v, sizeof(T), path);
}

template <typename T>
T read_pod(std::FILE* f, const std::string& path) {
    T v;
    read_bytes(f, &v, sizeof(T), path);
    return v;
}

}  // namespace

const Tensor& Checkpoint::tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw SchemaError("checkpoint tensor not found: " + name);
}

bool Checkpoint::has_tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return true;
    return false;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    File f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("cannot open for write: " + path);
    write_bytes(f.get(), kMagic, sizeof(kMagic), path);
    write_pod<std::uint32_t>(f.get(), kCheckpointVersion, path);
    const std::string meta = ck.meta.dump();
    write_pod<std::uint64_t>(f.get(), meta.size(), path);
    write_bytes(f.get(), meta.data(), meta.size(), path);
    write_pod<std::uint32_t>(f.get(), static_cast<std::uint32_t>(ck.tensors.size()), path);
    for (const auto& [name, t] : ck.tensors) {
        write_pod<std::uint16_t>(f.get(), static_cast<std::uint16_t>(name.size()), path);
        write_bytes(f.get(), name.data(), name.size(), path);
        write_pod<std::uint8_t>(f.get(), static_cast<std::uint8_t>(t.rank()), path);
        for (int d = 0; d < t.rank(); ++d)
            write_pod<std::uint64_t>(f.get(), static_cast<std::uint64_t>(t.dim(d)), path);
        write_bytes(f.get(), t.data(), static_cast<size_t>(t.numel()) * sizeof(double), path);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    File f(std::fopen(path.c_str(), "rb"));
    if (!f) throw DependencyError("checkpoint not found: " + path);
    char magic[8];
    read_bytes(f.get(), magic, sizeof(magic), path);
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw SchemaError("not a checkpoint file: " + path);
    const auto version = read_pod<std::uint32_t>(f.get(), path);
    if (version != kCheckpointVersion)
        throw SchemaError("unsupported checkpoint version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + "): " + path);
    const auto meta_len = read_pod<std::uint64_t>(f.get(), path);
    std::string meta(meta_len, '\0');
    read_bytes(f.get(), meta.data(), meta_len, path);
    Checkpoint ck;
    try {
        ck.meta = nlohmann::json::parse(meta);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("corrupt checkpoint metadata: " + path + ": " + e.what());
    }
    const auto count = read_pod<std::uint32_t>(f.get(), path);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_pod<std::uint16_t>(f.get(), path);
        std::string name(name_len, '\0');
        read_bytes(f.get(), name.data(), name_len, path);
        const auto rank = read_pod<std::uint8_t>(f.get(), path);
        std::vector<i64> shape(rank);
        for (auto& d : shape)
            d = static_cast<i64>(read_pod<std::uint64_t>(f.get(), path));
        Tensor t(shape);
        read_bytes(f.get(), t.data(), static_cast<size_t>(t.numel()) * sizeof(double), path);
        ck.tensors.emplace_back(std::move(name), std::move(t));
    }
    return ck;
}

Checkpoint load_checkpoint(const std::string& path, const std::string& kind) {
    Checkpoint ck = load_checkpoint(path);
    const std::string got = ck.meta.value("kind", "");
    if (got != kind)
        throw SchemaError("checkpoint kind mismatch: expected '" + kind + "', got '" +
                          got + "': " + path);
    return ck;
}

std::string sha256_hex(const void* data, size_t n) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data, n, digest, &len, EVP_sha256(), nullptr) != 1)
        throw IoError("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string file_sha256_hex(const std::string& path) {
    File f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot open: " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr) throw IoError("sha256 init failed");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    size_t got;
    while ((got = std::fread(buf, 1, sizeof(buf), f.get())) > 0)
        EVP_DigestUpdate(ctx, buf, got);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

}  // namespace latkit
