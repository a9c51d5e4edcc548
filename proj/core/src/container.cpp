#include "debias/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "debias/errors.hpp"

// Raw little-endian reads/writes below assume a little-endian host.
static_assert(std::endian::native == std::endian::little,
              "container format code assumes a little-endian host");

namespace debias {

void write_container(const std::string& path, const Container& c) {
    if (c.magic.size() != 4) throw DataError("container magic must be 4 bytes");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open for writing: " + path);
    f.write(c.magic.data(), 4);
    f.write(reinterpret_cast<const char*>(&c.version), sizeof(uint32_t));
    const uint64_t hlen = c.header_json.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(uint64_t));
    f.write(c.header_json.data(), static_cast<std::streamsize>(hlen));
    f.write(c.payload.data(), static_cast<std::streamsize>(c.payload.size()));
    if (!f) throw DataError("write failed: " + path);
}

Container read_container(const std::string& path, const std::string& expect_magic,
                         uint32_t expect_version) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);

    Container c;
    char magic[4];
    if (!f.read(magic, 4)) throw DataError("truncated file (no magic): " + path);
    c.magic.assign(magic, 4);
    if (c.magic != expect_magic) {
        throw DataError("bad magic in " + path + ": expected '" + expect_magic + "', found '" +
                        c.magic + "'");
    }
    if (!f.read(reinterpret_cast<char*>(&c.version), sizeof(uint32_t))) {
        throw DataError("truncated file (no version): " + path);
    }
    if (c.version != expect_version) {
        throw DataError("unsupported " + expect_magic + " version " + std::to_string(c.version) +
                        " in " + path + " (expected " + std::to_string(expect_version) + ")");
    }
    uint64_t hlen = 0;
    if (!f.read(reinterpret_cast<char*>(&hlen), sizeof(uint64_t))) {
        throw DataError("truncated file (no header length): " + path);
    }
    f.seekg(0, std::ios::end);
    const auto fsize = static_cast<uint64_t>(f.tellg());
    const uint64_t preamble = 4 + sizeof(uint32_t) + sizeof(uint64_t);
    if (hlen > fsize - preamble) throw DataError("corrupt header length in " + path);
    f.seekg(static_cast<std::streamoff>(preamble), std::ios::beg);

    c.header_json.resize(hlen);
    if (hlen > 0 && !f.read(c.header_json.data(), static_cast<std::streamsize>(hlen))) {
        throw DataError("truncated header in " + path);
    }
    const uint64_t psize = fsize - preamble - hlen;
    c.payload.resize(psize);
    if (psize > 0 && !f.read(c.payload.data(), static_cast<std::streamsize>(psize))) {
        throw DataError("truncated payload in " + path);
    }
    return c;
}

namespace {

uint64_t append_bytes(std::vector<char>& payload, const void* data, uint64_t bytes) {
    const uint64_t offset = payload.size();
    payload.resize(payload.size() + bytes);
    std::memcpy(payload.data() + offset, data, bytes);
    return offset;
}

void read_bytes(const std::vector<char>& payload, uint64_t offset, void* out, uint64_t bytes) {
    if (offset + bytes > payload.size()) throw DataError("payload read past end of container");
    std::memcpy(out, payload.data() + offset, bytes);
}

} // namespace

uint64_t append_floats(std::vector<char>& payload, const float* data, int64_t count) {
    return append_bytes(payload, data, static_cast<uint64_t>(count) * sizeof(float));
}

uint64_t append_u32s(std::vector<char>& payload, const uint32_t* data, int64_t count) {
    return append_bytes(payload, data, static_cast<uint64_t>(count) * sizeof(uint32_t));
}

void read_floats(const std::vector<char>& payload, uint64_t offset, float* out, int64_t count) {
    read_bytes(payload, offset, out, static_cast<uint64_t>(count) * sizeof(float));
}

void read_u32s(const std::vector<char>& payload, uint64_t offset, uint32_t* out, int64_t count) {
    read_bytes(payload, offset, out, static_cast<uint64_t>(count) * sizeof(uint32_t));
}

} // namespace debias
