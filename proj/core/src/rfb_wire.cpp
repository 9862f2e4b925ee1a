#include "usim/rfb_wire.hpp"

#include "usim/error.hpp"

namespace usim::rfb {

void put_u8(Bytes& out, uint8_t v) { out.push_back(v); }

void put_u16(Bytes& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v & 0xFF));
}

void put_u32(Bytes& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xFF));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xFF));
  out.push_back(static_cast<uint8_t>(v & 0xFF));
}

void put_s32(Bytes& out, int32_t v) { put_u32(out, static_cast<uint32_t>(v)); }

uint16_t get_u16(std::span<const uint8_t> p) {
  return static_cast<uint16_t>((p[0] << 8) | p[1]);
}

uint32_t get_u32(std::span<const uint8_t> p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

PixelFormat rgba32_little_endian() { return PixelFormat{}; }

void append_pixel_format(Bytes& out, const PixelFormat& pf) {
  put_u8(out, pf.bits_per_pixel);
  put_u8(out, pf.depth);
  put_u8(out, pf.big_endian);
  put_u8(out, pf.true_colour);
  put_u16(out, pf.red_max);
  put_u16(out, pf.green_max);
  put_u16(out, pf.blue_max);
  put_u8(out, pf.red_shift);
  put_u8(out, pf.green_shift);
  put_u8(out, pf.blue_shift);
  put_u8(out, 0);
  put_u8(out, 0);
  put_u8(out, 0);
}

PixelFormat parse_pixel_format(std::span<const uint8_t> b) {
  if (b.size() < 16)
    throw Error(ErrorCode::io_error, "pixel format block too short");
  PixelFormat pf;
  pf.bits_per_pixel = b[0];
  pf.depth = b[1];
  pf.big_endian = b[2];
  pf.true_colour = b[3];
  pf.red_max = get_u16(b.subspan(4));
  pf.green_max = get_u16(b.subspan(6));
  pf.blue_max = get_u16(b.subspan(8));
  pf.red_shift = b[10];
  pf.green_shift = b[11];
  pf.blue_shift = b[12];
  return pf;
}

Bytes encode_set_pixel_format(const PixelFormat& pf) {
  Bytes out;
  put_u8(out, msg_set_pixel_format);
  put_u8(out, 0);
  put_u8(out, 0);
  put_u8(out, 0);
  append_pixel_format(out, pf);
  return out;
}

Bytes encode_set_encodings(std::span<const int32_t> encodings) {
  Bytes out;
  put_u8(out, msg_set_encodings);
  put_u8(out, 0);
  put_u16(out, static_cast<uint16_t>(encodings.size()));
  for (int32_t e : encodings) put_s32(out, e);
  return out;
}

Bytes encode_framebuffer_update_request(bool incremental, uint16_t x, uint16_t y,
                                        uint16_t w, uint16_t h) {
  Bytes out;
  put_u8(out, msg_framebuffer_update_request);
  put_u8(out, incremental ? 1 : 0);
  put_u16(out, x);
  put_u16(out, y);
  put_u16(out, w);
  put_u16(out, h);
  return out;
}

Bytes encode_key_event(bool down, uint32_t keysym) {
  Bytes out;
  put_u8(out, msg_key_event);
  put_u8(out, down ? 1 : 0);
  put_u16(out, 0);
  put_u32(out, keysym);
  return out;
}

Bytes encode_pointer_event(uint8_t button_mask, uint16_t x, uint16_t y) {
  Bytes out;
  put_u8(out, msg_pointer_event);
  put_u8(out, button_mask);
  put_u16(out, x);
  put_u16(out, y);
  return out;
}

Bytes encode_framebuffer_update_header(uint16_t rect_count) {
  Bytes out;
  put_u8(out, msg_framebuffer_update);
  put_u8(out, 0);
  put_u16(out, rect_count);
  return out;
}

Bytes encode_rect_header(uint16_t x, uint16_t y, uint16_t w, uint16_t h,
                         int32_t encoding) {
  Bytes out;
  put_u16(out, x);
  put_u16(out, y);
  put_u16(out, w);
  put_u16(out, h);
  put_s32(out, encoding);
  return out;
}

namespace {

uint32_t pack_pixel(const Rgba& p, const PixelFormat& pf) {
  return (static_cast<uint32_t>(p.r & pf.red_max) << pf.red_shift) |
         (static_cast<uint32_t>(p.g & pf.green_max) << pf.green_shift) |
         (static_cast<uint32_t>(p.b & pf.blue_max) << pf.blue_shift);
}

} // namespace

void append_raw_pixels(Bytes& out, const Frame& frame, const Rect& rect,
                       const PixelFormat& pf) {
  out.reserve(out.size() + static_cast<size_t>(rect.w) * rect.h * 4);
  for (int y = rect.y; y < rect.bottom(); ++y) {
    for (int x = rect.x; x < rect.right(); ++x) {
      uint32_t v = pack_pixel(frame.at(x, y), pf);
      if (pf.big_endian) {
        put_u32(out, v);
      } else {
        out.push_back(static_cast<uint8_t>(v & 0xFF));
        out.push_back(static_cast<uint8_t>((v >> 8) & 0xFF));
        out.push_back(static_cast<uint8_t>((v >> 16) & 0xFF));
        out.push_back(static_cast<uint8_t>((v >> 24) & 0xFF));
      }
    }
  }
}

size_t parse_raw_pixels(std::span<const uint8_t> data, Frame& frame,
                        const Rect& rect, const PixelFormat& pf) {
  size_t need = static_cast<size_t>(rect.w) * rect.h * 4;
  if (data.size() < need)
    throw Error(ErrorCode::io_error, "raw rectangle payload too short");
  size_t i = 0;
  for (int y = rect.y; y < rect.bottom(); ++y) {
    for (int x = rect.x; x < rect.right(); ++x) {
      uint32_t v;
      if (pf.big_endian) {
        v = get_u32(data.subspan(i));
      } else {
        v = static_cast<uint32_t>(data[i]) | (static_cast<uint32_t>(data[i + 1]) << 8) |
            (static_cast<uint32_t>(data[i + 2]) << 16) |
            (static_cast<uint32_t>(data[i + 3]) << 24);
      }
      i += 4;
      frame.at(x, y) = {static_cast<uint8_t>((v >> pf.red_shift) & pf.red_max),
                        static_cast<uint8_t>((v >> pf.green_shift) & pf.green_max),
                        static_cast<uint8_t>((v >> pf.blue_shift) & pf.blue_max), 255};
    }
  }
  return need;
}

} // namespace usim::rfb
