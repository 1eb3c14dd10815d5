#pragma once

// Versioned binary model container. Round trips are bit-exact: every
// mantissa, format, scale, and dimension survives. Layout (little-endian):
//
//   magic   "ESQNCKPT"                     8 bytes
//   version u32 (currently 1)
//   input_dim u32, num_classes u32, layer_count u32
//   per layer:
//     storage u8 (0 quantized, 1 float32), activation u8 (0 none, 1 relu)
//     scale_exp i32, in_dim u32, out_dim u32
//     quantized: weight/input/activation formats as (total u8, frac u8,
//                signed u8) triples, then out*in + out mantissas as i32
//     float32:   out*in + out IEEE-754 singles
//   checksum u64 (FNV-1a over everything before it)

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "estrain/network.hpp"
#include "estrain/serial.hpp"

namespace estrain {

struct CheckpointError : std::runtime_error {
    enum class Kind { malformed, version, checksum };
    Kind kind;
    CheckpointError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

namespace detail {
inline constexpr char ckpt_magic[8] = {'E', 'S', 'Q', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t ckpt_version = 1;

inline void put_fmt(serial::Writer& w, const QFormat& f) {
    w.u8(std::uint8_t(f.total_bits));
    w.u8(std::uint8_t(f.frac_bits));
    w.u8(f.is_signed ? 1 : 0);
}
inline QFormat get_fmt(serial::Reader& r) {
    QFormat f;
    f.total_bits = r.u8();
    f.frac_bits = r.u8();
    f.is_signed = r.u8() != 0;
    return f;
}
}  // namespace detail

inline std::vector<std::uint8_t> serialize_model(const Model& m) {
    m.validate();
    serial::Writer w;
    w.bytes(detail::ckpt_magic, 8);
    w.u32(detail::ckpt_version);
    w.u32(std::uint32_t(m.input_dim));
    w.u32(std::uint32_t(m.num_classes));
    w.u32(std::uint32_t(m.layers.size()));
    for (const auto& l : m.layers) {
        w.u8(l.float_storage ? 1 : 0);
        w.u8(std::uint8_t(l.activation));
        w.i32(l.scale_exp);
        w.u32(std::uint32_t(l.in_dim));
        w.u32(std::uint32_t(l.out_dim));
        if (l.float_storage) {
            for (float v : l.wf) w.f32(v);
            for (float v : l.bf) w.f32(v);
        } else {
            detail::put_fmt(w, l.weight_fmt);
            detail::put_fmt(w, l.in_fmt);
            detail::put_fmt(w, l.act_fmt);
            for (auto v : l.w) w.i32(v);
            for (auto v : l.b) w.i32(v);
        }
    }
    w.finish_with_checksum();
    return w.buf;
}

inline Model deserialize_model(const std::vector<std::uint8_t>& buf) {
    using Kind = CheckpointError::Kind;
    if (buf.size() < 8 + 4 + 12 + 8)
        throw CheckpointError(Kind::malformed, "checkpoint: file too short");
    if (std::memcmp(buf.data(), detail::ckpt_magic, 8) != 0)
        throw CheckpointError(Kind::malformed, "checkpoint: bad magic");

    serial::Reader hdr(buf);
    hdr.pos = 8;
    const std::uint32_t version = hdr.u32();
    if (version != detail::ckpt_version)
        throw CheckpointError(Kind::version, "checkpoint: unsupported version " +
                                                 std::to_string(version));

    // Parse structurally before checking the checksum: truncation is a
    // malformed file, not a corruption of an intact one.
    const std::size_t body = buf.size() - 8;
    Model m;
    try {
        serial::Reader r(buf);
        r.pos = 12;
        r.n = body;  // the checksum trailer is not part of the body
        m.input_dim = int(r.u32());
        m.num_classes = int(r.u32());
        const std::uint32_t nl = r.u32();
        if (nl == 0 || nl > 1024)
            throw CheckpointError(Kind::malformed, "checkpoint: bad layer count");
        for (std::uint32_t i = 0; i < nl; ++i) {
            DenseLayer l;
            l.float_storage = r.u8() != 0;
            l.activation = Activation(r.u8());
            l.scale_exp = r.i32();
            l.in_dim = int(r.u32());
            l.out_dim = int(r.u32());
            if (l.in_dim <= 0 || l.out_dim <= 0 ||
                std::int64_t(l.in_dim) * l.out_dim > (std::int64_t{1} << 28))
                throw CheckpointError(Kind::malformed, "checkpoint: bad layer dims");
            const std::size_t nw = l.weight_count();
            if (l.float_storage) {
                l.wf.resize(nw);
                l.bf.resize(l.out_dim);
                for (auto& v : l.wf) v = r.f32();
                for (auto& v : l.bf) v = r.f32();
            } else {
                l.weight_fmt = detail::get_fmt(r);
                l.in_fmt = detail::get_fmt(r);
                l.act_fmt = detail::get_fmt(r);
                l.w.resize(nw);
                l.b.resize(l.out_dim);
                for (auto& v : l.w) v = r.i32();
                for (auto& v : l.b) v = r.i32();
            }
            m.layers.push_back(std::move(l));
        }
        if (r.pos != body)
            throw CheckpointError(Kind::malformed, "checkpoint: trailing bytes");
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError(Kind::malformed, std::string("checkpoint: ") + e.what());
    }

    serial::Reader tail(buf);
    tail.pos = body;
    if (tail.u64() != serial::fnv1a(buf.data(), body))
        throw CheckpointError(Kind::checksum, "checkpoint: checksum mismatch");

    try {
        m.validate();
    } catch (const std::exception& e) {
        throw CheckpointError(Kind::malformed, std::string("checkpoint: ") + e.what());
    }
    return m;
}

inline void save_checkpoint(const Model& m, const std::filesystem::path& path) {
    serial::write_file(path, serialize_model(m));
}

inline Model load_checkpoint(const std::filesystem::path& path) {
    return deserialize_model(serial::read_file(path));
}

}  // namespace estrain
