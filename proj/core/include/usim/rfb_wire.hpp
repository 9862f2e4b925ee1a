#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "usim/frame.hpp"

// RFC 6143 message layouts, restricted to the subset this toolkit
// speaks: protocol 3.8, security type None, Raw encoding, 32bpp
// true-colour little-endian pixels. Pure byte codec; sockets live in
// channel.cpp and simdesk_server.cpp.
namespace usim::rfb {

using Bytes = std::vector<uint8_t>;

inline const std::string protocol_version_3_8 = "RFB 003.008\n";

constexpr uint8_t security_none = 1;
constexpr int32_t encoding_raw = 0;

// Client-to-server message types.
constexpr uint8_t msg_set_pixel_format = 0;
constexpr uint8_t msg_set_encodings = 2;
constexpr uint8_t msg_framebuffer_update_request = 3;
constexpr uint8_t msg_key_event = 4;
constexpr uint8_t msg_pointer_event = 5;

// Server-to-client message types.
constexpr uint8_t msg_framebuffer_update = 0;

struct PixelFormat {
  uint8_t bits_per_pixel = 32;
  uint8_t depth = 24;
  uint8_t big_endian = 0;
  uint8_t true_colour = 1;
  uint16_t red_max = 255;
  uint16_t green_max = 255;
  uint16_t blue_max = 255;
  uint8_t red_shift = 0;
  uint8_t green_shift = 8;
  uint8_t blue_shift = 16;

  friend bool operator==(const PixelFormat&, const PixelFormat&) = default;
};

// The one format the toolkit requests: 0xXXBBGGRR words stored
// little-endian, so the wire bytes run R, G, B, pad.
PixelFormat rgba32_little_endian();

// 16-byte pixel-format block (network order fields, 3 bytes padding).
void append_pixel_format(Bytes& out, const PixelFormat& pf);
PixelFormat parse_pixel_format(std::span<const uint8_t> body16);

// Client message encoders. Each returns the full message, type byte
// included, laid out exactly as RFC 6143 defines.
Bytes encode_set_pixel_format(const PixelFormat& pf);
Bytes encode_set_encodings(std::span<const int32_t> encodings);
Bytes encode_framebuffer_update_request(bool incremental, uint16_t x, uint16_t y,
                                        uint16_t w, uint16_t h);
Bytes encode_key_event(bool down, uint32_t keysym);
Bytes encode_pointer_event(uint8_t button_mask, uint16_t x, uint16_t y);

// Server message encoders.
Bytes encode_framebuffer_update_header(uint16_t rect_count);
Bytes encode_rect_header(uint16_t x, uint16_t y, uint16_t w, uint16_t h,
                         int32_t encoding);

// Raw-encoding pixel payload for a full frame or sub-rectangle.
void append_raw_pixels(Bytes& out, const Frame& frame, const Rect& rect,
                       const PixelFormat& pf);
// Inverse: fills rect of frame from raw payload; returns bytes consumed.
size_t parse_raw_pixels(std::span<const uint8_t> data, Frame& frame,
                        const Rect& rect, const PixelFormat& pf);

// Big-endian primitives shared by the codec and the socket layers.
void put_u8(Bytes& out, uint8_t v);
void put_u16(Bytes& out, uint16_t v);
void put_u32(Bytes& out, uint32_t v);
void put_s32(Bytes& out, int32_t v);
uint16_t get_u16(std::span<const uint8_t> p); // first two bytes
uint32_t get_u32(std::span<const uint8_t> p); // first four bytes

} // namespace usim::rfb
