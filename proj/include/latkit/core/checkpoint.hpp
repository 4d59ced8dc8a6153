#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "latkit/core/tensor.hpp"

namespace latkit {

// Binary checkpoint: magic, format version, JSON metadata (kind, shapes,
// training config), then named double tensors. Readers reject unknown
// versions and wrong kinds instead of guessing.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    nlohmann::json meta;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor& tensor(const std::string& name) const;
    bool has_tensor(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// Loads and verifies meta["kind"] == kind; SchemaError otherwise.
Checkpoint load_checkpoint(const std::string& path, const std::string& kind);

// Hex SHA-256 of a file's bytes; IoError if unreadable.
std::string file_sha256_hex(const std::string& path);

// Hex SHA-256 of a byte buffer.
std::string sha256_hex(const void* data, size_t n);

}  // namespace latkit
