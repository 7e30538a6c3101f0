#include "instat/proto/codec.hpp"

#include <cmath>

#include "instat/bytes.hpp"

namespace instat::proto {

const char* to_string(DecodeError e) {
    switch (e) {
    case DecodeError::bad_magic: return "bad magic";
    case DecodeError::bad_version: return "protocol version mismatch";
    case DecodeError::truncated: return "truncated frame";
    case DecodeError::length_overflow: return "frame length overflow";
    case DecodeError::bad_kind: return "unknown message kind";
    case DecodeError::malformed_body: return "malformed message body";
    }
    return "unknown decode error";
}

namespace {

bool valid_kind(std::uint8_t k) {
    return k >= static_cast<std::uint8_t>(MsgKind::hello) &&
           k <= static_cast<std::uint8_t>(MsgKind::ack);
}

} // namespace

std::vector<std::uint8_t> encode_message(const Message& m) {
    ByteWriter w;
    w.u32(kFrameMagic);
    w.u8(kProtocolVersion);
    w.u8(static_cast<std::uint8_t>(m.kind));
    w.u16(0);
    const std::size_t len_at = w.size();
    w.u32(0); // body length, patched below
    w.str(m.study_id);
    w.u32(m.simulation_id);
    if (m.kind == MsgKind::data) {
        w.str(m.field_name);
        w.u32(m.timestep);
        w.u64(m.cell_offset);
        w.u32(static_cast<std::uint32_t>(m.values.size()));
        w.f64_array(m.values);
    }
    w.patch_u32(len_at, static_cast<std::uint32_t>(w.size() - kFrameHeaderSize));
    return w.take();
}

std::variant<std::uint32_t, DecodeError> peek_body_len(std::span<const std::uint8_t> header) {
    if (header.size() < kFrameHeaderSize) return DecodeError::truncated;
    ByteReader r(header);
    try {
        if (r.u32() != kFrameMagic) return DecodeError::bad_magic;
        if (r.u8() != kProtocolVersion) return DecodeError::bad_version;
        const std::uint8_t kind = r.u8();
        if (!valid_kind(kind)) return DecodeError::bad_kind;
        if (r.u16() != 0) return DecodeError::malformed_body;
        const std::uint32_t body_len = r.u32();
        if (body_len > kMaxBodyLen) return DecodeError::length_overflow;
        return body_len;
    } catch (const ByteUnderflow&) {
        return DecodeError::truncated;
    }
}

DecodeResult decode_message(std::span<const std::uint8_t> bytes) {
    const auto header = peek_body_len(bytes);
    if (const auto* err = std::get_if<DecodeError>(&header)) return *err;
    const std::uint32_t body_len = std::get<std::uint32_t>(header);
    if (bytes.size() < kFrameHeaderSize + body_len) return DecodeError::truncated;

    ByteReader r(bytes.subspan(kFrameHeaderSize, body_len));
    Message m;
    m.kind = static_cast<MsgKind>(bytes[5]);
    try {
        m.study_id = r.str();
        m.simulation_id = r.u32();
        if (m.kind == MsgKind::data) {
            m.field_name = r.str();
            m.timestep = r.u32();
            m.cell_offset = r.u64();
            const std::uint32_t count = r.u32();
            if (count == 0) return DecodeError::malformed_body;
            if (static_cast<std::uint64_t>(count) * 8 != r.remaining())
                return DecodeError::malformed_body;
            m.values.resize(count);
            r.f64_array(m.values);
        }
        if (r.remaining() != 0) return DecodeError::malformed_body;
    } catch (const ByteUnderflow&) {
        return DecodeError::malformed_body;
    }
    return Decoded{std::move(m), kFrameHeaderSize + body_len};
}

} // namespace instat::proto
