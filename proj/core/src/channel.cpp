#include "usim/channel.hpp"

#include <array>
#include <cctype>

#include "usim/clock.hpp"
#include "usim/error.hpp"
#include "usim/net.hpp"

namespace usim::channel {

namespace {

std::string printable(std::span<const uint8_t> bytes) {
  std::string out;
  for (uint8_t b : bytes) {
    if (std::isprint(b) && b != '\\') {
      out.push_back(static_cast<char>(b));
    } else {
      char hex[8];
      std::snprintf(hex, sizeof(hex), "\\x%02x", b);
      out += hex;
    }
  }
  return out;
}

class RfbSession final : public Session {
 public:
  RfbSession(net::TcpStream stream, const Endpoint& endpoint)
      : stream_(std::move(stream)) {
    handshake(endpoint);
  }

  int width() const override { return framebuffer_.width; }
  int height() const override { return framebuffer_.height; }
  std::string desktop_name() const override { return name_; }

  Frame capture_frame() override {
    require_open();
    send(rfb::encode_framebuffer_update_request(
        false, 0, 0, static_cast<uint16_t>(framebuffer_.width),
        static_cast<uint16_t>(framebuffer_.height)));
    read_framebuffer_update();
    Frame copy = framebuffer_;
    copy.captured_at = steady_now_ms();
    return copy;
  }

  void send_pointer(const PointerEvent& event) override {
    require_open();
    if (event.x < 0 || event.x >= framebuffer_.width || event.y < 0 ||
        event.y >= framebuffer_.height) {
      throw Error(ErrorCode::coordinates_out_of_range,
                  "(" + std::to_string(event.x) + "," + std::to_string(event.y) +
                      ") outside " + std::to_string(framebuffer_.width) + "x" +
                      std::to_string(framebuffer_.height));
    }
    send(rfb::encode_pointer_event(event.buttons, static_cast<uint16_t>(event.x),
                                   static_cast<uint16_t>(event.y)));
  }

  void send_key(const KeyEvent& event) override {
    require_open();
    send(rfb::encode_key_event(event.pressed, event.keysym));
  }

  void close() override { stream_.close(); }

 private:
  void require_open() const {
    if (!stream_.valid())
      throw Error(ErrorCode::session_closed, "session is closed");
  }

  void send(const rfb::Bytes& bytes) {
    if (!stream_.write_all(bytes)) {
      stream_.close();
      throw Error(ErrorCode::session_closed, "write failed");
    }
  }

  void read_or_close(void* buf, size_t n, const char* what) {
    if (!stream_.read_exact(buf, n)) {
      stream_.close();
      throw Error(ErrorCode::session_closed, std::string("short read: ") + what);
    }
  }

  void handshake(const Endpoint& endpoint) {
    // ProtocolVersion
    std::array<uint8_t, 12> banner{};
    read_or_close(banner.data(), banner.size(), "protocol version");
    std::string version(banner.begin(), banner.end());
    if (version != rfb::protocol_version_3_8) {
      stream_.close();
      throw Error(ErrorCode::protocol_version_mismatch,
                  endpoint.host + ":" + std::to_string(endpoint.port) +
                      " sent \"" + printable(banner) + "\"");
    }
    send(rfb::Bytes(rfb::protocol_version_3_8.begin(),
                    rfb::protocol_version_3_8.end()));

    // Security negotiation: needs type None on offer.
    uint8_t type_count = 0;
    read_or_close(&type_count, 1, "security type count");
    if (type_count == 0) {
      std::string reason = read_reason_string();
      throw Error(ErrorCode::security_negotiation_failed,
                  "server refused connection: " + reason);
    }
    std::vector<uint8_t> types(type_count);
    read_or_close(types.data(), types.size(), "security types");
    bool has_none = false;
    for (uint8_t t : types) has_none |= (t == rfb::security_none);
    if (!has_none) {
      stream_.close();
      throw Error(ErrorCode::security_negotiation_failed,
                  "no security type None among [" + printable(types) + "]");
    }
    uint8_t chosen = rfb::security_none;
    send({chosen});
    std::array<uint8_t, 4> result{};
    read_or_close(result.data(), result.size(), "security result");
    if (rfb::get_u32(result) != 0) {
      std::string reason = read_reason_string();
      throw Error(ErrorCode::security_negotiation_failed,
                  "security result not ok: " + reason);
    }

    // ClientInit (shared) / ServerInit
    send({1});
    std::array<uint8_t, 24> init{};
    read_or_close(init.data(), init.size(), "server init");
    int w = rfb::get_u16(std::span(init).subspan(0));
    int h = rfb::get_u16(std::span(init).subspan(2));
    uint32_t name_len = rfb::get_u32(std::span(init).subspan(20));
    std::vector<uint8_t> name(name_len);
    if (name_len > 0) read_or_close(name.data(), name.size(), "desktop name");
    name_.assign(name.begin(), name.end());
    framebuffer_ = Frame(w, h);

    pixel_format_ = rfb::rgba32_little_endian();
    send(rfb::encode_set_pixel_format(pixel_format_));
    const int32_t encodings[] = {rfb::encoding_raw};
    send(rfb::encode_set_encodings(encodings));
  }

  std::string read_reason_string() {
    std::array<uint8_t, 4> len_bytes{};
    if (!stream_.read_exact(len_bytes.data(), len_bytes.size())) return "(none)";
    uint32_t len = rfb::get_u32(len_bytes);
    if (len > 4096) return "(oversized reason)";
    std::vector<uint8_t> reason(len);
    if (len > 0 && !stream_.read_exact(reason.data(), reason.size()))
      return "(truncated reason)";
    stream_.close();
    return std::string(reason.begin(), reason.end());
  }

  void read_framebuffer_update() {
    uint8_t msg_type = 0;
    read_or_close(&msg_type, 1, "server message type");
    if (msg_type != rfb::msg_framebuffer_update) {
      stream_.close();
      throw Error(ErrorCode::malformed_rectangle,
                  "unexpected server message type " + std::to_string(msg_type));
    }
    std::array<uint8_t, 3> head{};
    read_or_close(head.data(), head.size(), "update header");
    uint16_t rect_count = rfb::get_u16(std::span(head).subspan(1));
    for (uint16_t i = 0; i < rect_count; ++i) {
      std::array<uint8_t, 12> rect_head{};
      read_or_close(rect_head.data(), rect_head.size(), "rectangle header");
      Rect rect{rfb::get_u16(std::span(rect_head).subspan(0)),
                rfb::get_u16(std::span(rect_head).subspan(2)),
                rfb::get_u16(std::span(rect_head).subspan(4)),
                rfb::get_u16(std::span(rect_head).subspan(6))};
      int32_t encoding =
          static_cast<int32_t>(rfb::get_u32(std::span(rect_head).subspan(8)));
      if (encoding != rfb::encoding_raw) {
        stream_.close();
        throw Error(ErrorCode::malformed_rectangle,
                    "unsupported encoding " + std::to_string(encoding));
      }
      if (rect.w == 0 || rect.h == 0 || rect.right() > framebuffer_.width ||
          rect.bottom() > framebuffer_.height) {
        stream_.close();
        throw Error(ErrorCode::malformed_rectangle,
                    "rectangle " + std::to_string(rect.x) + "," +
                        std::to_string(rect.y) + " " + std::to_string(rect.w) +
                        "x" + std::to_string(rect.h) + " outside framebuffer");
      }
      std::vector<uint8_t> payload(static_cast<size_t>(rect.w) * rect.h * 4);
      read_or_close(payload.data(), payload.size(), "raw pixels");
      rfb::parse_raw_pixels(payload, framebuffer_, rect, pixel_format_);
    }
  }

  net::TcpStream stream_;
  Frame framebuffer_;
  rfb::PixelFormat pixel_format_;
  std::string name_;
};

} // namespace

std::unique_ptr<Session> connect(const Endpoint& endpoint) {
  if (!endpoint.valid())
    throw Error(ErrorCode::connection_refused,
                "invalid endpoint " + endpoint.host + ":" +
                    std::to_string(endpoint.port));
  bool refused = false;
  std::string detail;
  net::TcpStream stream = net::connect_tcp(endpoint.host, endpoint.port, refused, detail);
  if (!stream.valid()) {
    throw Error(ErrorCode::connection_refused,
                endpoint.host + ":" + std::to_string(endpoint.port) + " (" +
                    (detail.empty() ? "unreachable" : detail) + ")");
  }
  return std::make_unique<RfbSession>(std::move(stream), endpoint);
}

} // namespace usim::channel
