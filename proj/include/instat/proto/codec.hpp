#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "instat/proto/message.hpp"

namespace instat::proto {

// Frame layout (little-endian):
//   u32 magic      "IST1"
//   u8  version    currently 1
//   u8  kind
//   u16 reserved   must be 0
//   u32 body_len   length of the body that follows
//   body:
//     str study_id             (u16 length prefix)
//     u32 simulation_id
//     data messages append:
//       str field_name
//       u32 timestep
//       u64 cell_offset
//       u32 value_count
//       f64 * value_count
inline constexpr std::uint32_t kFrameMagic = 0x31545349; // "IST1"
inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 12;
inline constexpr std::uint32_t kMaxBodyLen = 64u << 20;

enum class DecodeError : std::uint8_t {
    bad_magic,
    bad_version,
    truncated,
    length_overflow,
    bad_kind,
    malformed_body,
};

const char* to_string(DecodeError e);

struct Decoded {
    Message message;
    std::size_t frame_size = 0; // bytes consumed from the input
};

using DecodeResult = std::variant<Decoded, DecodeError>;

std::vector<std::uint8_t> encode_message(const Message& m);

// Total decoder: any byte sequence yields either a decoded message or a
// typed error, never an exception or a crash.
DecodeResult decode_message(std::span<const std::uint8_t> bytes);

// Frame header pre-parse for incremental stream reads: given at least
// kFrameHeaderSize bytes, validates the header and returns the body length.
std::variant<std::uint32_t, DecodeError> peek_body_len(std::span<const std::uint8_t> header);

} // namespace instat::proto
