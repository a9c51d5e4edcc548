#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "debias/tensor.hpp"

namespace debias {

// Shared on-disk framing for datasets (DBDS) and checkpoints (DBCK):
//   magic[4] | version u32 LE | header_len u64 LE | UTF-8 JSON header | payload
struct Container {
    std::string magic;
    uint32_t version = 1;
    std::string header_json;
    std::vector<char> payload;
};

void write_container(const std::string& path, const Container& c);

// Throws DataError when the file is missing/truncated, the magic does not
// match, or the version differs from expect_version.
Container read_container(const std::string& path, const std::string& expect_magic,
                         uint32_t expect_version);

// Payload helpers; offsets are byte offsets relative to the payload start.
uint64_t append_floats(std::vector<char>& payload, const float* data, int64_t count);
uint64_t append_u32s(std::vector<char>& payload, const uint32_t* data, int64_t count);
void read_floats(const std::vector<char>& payload, uint64_t offset, float* out, int64_t count);
void read_u32s(const std::vector<char>& payload, uint64_t offset, uint32_t* out, int64_t count);

} // namespace debias
