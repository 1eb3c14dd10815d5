#pragma once

// Little-endian byte buffer helpers and the FNV-1a checksum shared by the
// checkpoint and trainer-state containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace estrain::serial {

inline std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n,
                           std::uint64_t h = 14695981039346656037ull) {
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 1099511628211ull;
    }
    return h;
}

struct Writer {
    std::vector<std::uint8_t> buf;

    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf.insert(buf.end(), b, b + n);
    }
    void u8(std::uint8_t v) { buf.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(std::uint8_t(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(std::uint32_t(v)); }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf.push_back(std::uint8_t(v >> (8 * i)));
    }
    void f32(float v) {
        std::uint32_t b;
        std::memcpy(&b, &v, 4);
        u32(b);
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    void finish_with_checksum() { u64(fnv1a(buf.data(), buf.size())); }
};

struct Reader {
    const std::uint8_t* p = nullptr;
    std::size_t n = 0;
    std::size_t pos = 0;

    explicit Reader(const std::vector<std::uint8_t>& v) : p(v.data()), n(v.size()) {}

    bool have(std::size_t k) const { return pos + k <= n; }
    void need(std::size_t k) const {
        if (!have(k)) throw std::out_of_range("truncated payload");
    }
    std::uint8_t u8() {
        need(1);
        return p[pos++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::int32_t i32() { return std::int32_t(u32()); }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    float f32() {
        std::uint32_t b = u32();
        float v;
        std::memcpy(&v, &b, 4);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
};

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& buf) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    f.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    const auto size = f.tellg();
    f.seekg(0);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(size));
    f.read(reinterpret_cast<char*>(buf.data()), size);
    if (!f) throw std::runtime_error("read failed: " + path.string());
    return buf;
}

}  // namespace estrain::serial
