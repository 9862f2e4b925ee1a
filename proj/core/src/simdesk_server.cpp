#include <array>
#include <atomic>
#include <mutex>
#include <thread>

#include "usim/clock.hpp"
#include "usim/error.hpp"
#include "usim/net.hpp"
#include "usim/rfb_wire.hpp"
#include "usim/simdesk.hpp"

namespace usim::simdesk {

namespace {

class ServerImpl final : public Server {
 public:
  ServerImpl(Scene scene, int port) : scene_(std::move(scene)) {
    bool in_use = false;
    std::string detail;
    if (!listener_.listen_on(port, in_use, detail)) {
      throw Error(in_use ? ErrorCode::port_in_use : ErrorCode::io_error,
                  "port " + std::to_string(port) + ": " + detail);
    }
    thread_ = std::thread([this] { run(); });
  }

  ~ServerImpl() override { stop(); }

  int port() const override { return listener_.port(); }

  void stop() override {
    if (!stopping_.exchange(true)) {
      listener_.close();
      {
        std::lock_guard lock(client_mu_);
        if (client_) client_->shutdown_both();
      }
    }
    if (thread_.joinable()) thread_.join();
  }

  std::vector<LogEntry> event_log() const override {
    std::lock_guard lock(mu_);
    return scene_.event_log;
  }

  ServerStats stats() const override {
    std::lock_guard lock(mu_);
    return stats_;
  }

  Scene scene_snapshot() const override {
    std::lock_guard lock(mu_);
    Scene copy = scene_;
    advance_to(copy, steady_now_ms());
    return copy;
  }

  std::string scene_digest() const override {
    Scene copy = scene_snapshot();
    return state_digest(copy);
  }

 private:
  void run() {
    while (!stopping_) {
      net::TcpStream client = listener_.accept_one();
      if (!client.valid()) break; // listener closed
      {
        std::lock_guard lock(client_mu_);
        client_ = &client;
      }
      serve_client(client);
      {
        std::lock_guard lock(client_mu_);
        client_ = nullptr;
      }
      std::lock_guard lock(mu_);
      stats_.connections++;
    }
  }

  bool serve_client(net::TcpStream& client) {
    if (!client.write_all({reinterpret_cast<const uint8_t*>(
                               rfb::protocol_version_3_8.data()),
                           rfb::protocol_version_3_8.size()}))
      return false;
    std::array<uint8_t, 12> client_version{};
    if (!client.read_exact(client_version.data(), client_version.size())) return false;
    if (std::string(client_version.begin(), client_version.end()) !=
        rfb::protocol_version_3_8)
      return false;

    const uint8_t security_offer[2] = {1, rfb::security_none};
    if (!client.write_all(security_offer)) return false;
    uint8_t chosen = 0;
    if (!client.read_exact(&chosen, 1) || chosen != rfb::security_none) return false;
    rfb::Bytes result;
    rfb::put_u32(result, 0);
    if (!client.write_all(result)) return false;

    uint8_t shared = 0;
    if (!client.read_exact(&shared, 1)) return false;

    rfb::Bytes init;
    std::string name;
    {
      std::lock_guard lock(mu_);
      rfb::put_u16(init, static_cast<uint16_t>(scene_.width));
      rfb::put_u16(init, static_cast<uint16_t>(scene_.height));
      name = scene_.name;
    }
    rfb::append_pixel_format(init, rfb::rgba32_little_endian());
    rfb::put_u32(init, static_cast<uint32_t>(name.size()));
    init.insert(init.end(), name.begin(), name.end());
    if (!client.write_all(init)) return false;

    pixel_format_ = rfb::rgba32_little_endian();
    for (;;) {
      uint8_t type = 0;
      if (!client.read_exact(&type, 1)) return true; // client left
      {
        std::lock_guard lock(mu_);
        stats_.message_histogram[type]++;
      }
      switch (type) {
        case rfb::msg_set_pixel_format: {
          std::array<uint8_t, 19> body{};
          if (!client.read_exact(body.data(), body.size())) return true;
          rfb::PixelFormat pf = rfb::parse_pixel_format(
              std::span(body).subspan(3));
          if (pf.bits_per_pixel != 32 || !pf.true_colour) return true;
          pixel_format_ = pf;
          break;
        }
        case rfb::msg_set_encodings: {
          std::array<uint8_t, 3> head{};
          if (!client.read_exact(head.data(), head.size())) return true;
          uint16_t count = rfb::get_u16(std::span(head).subspan(1));
          std::vector<uint8_t> body(static_cast<size_t>(count) * 4);
          if (count && !client.read_exact(body.data(), body.size())) return true;
          break;
        }
        case rfb::msg_framebuffer_update_request: {
          std::array<uint8_t, 9> body{};
          if (!client.read_exact(body.data(), body.size())) return true;
          if (!send_full_update(client)) return true;
          break;
        }
        case rfb::msg_key_event: {
          std::array<uint8_t, 7> body{};
          if (!client.read_exact(body.data(), body.size())) return true;
          KeyEvent event;
          event.pressed = body[0] != 0;
          event.keysym = rfb::get_u32(std::span(body).subspan(3));
          event.at = steady_now_ms();
          std::lock_guard lock(mu_);
          scene_step(scene_, event);
          break;
        }
        case rfb::msg_pointer_event: {
          std::array<uint8_t, 5> body{};
          if (!client.read_exact(body.data(), body.size())) return true;
          PointerEvent event;
          event.buttons = body[0];
          event.x = rfb::get_u16(std::span(body).subspan(1));
          event.y = rfb::get_u16(std::span(body).subspan(3));
          event.at = steady_now_ms();
          std::lock_guard lock(mu_);
          event.x = std::min(event.x, scene_.width - 1);
          event.y = std::min(event.y, scene_.height - 1);
          scene_step(scene_, event);
          break;
        }
        default:
          return true; // outside the spoken subset; drop the client
      }
    }
  }

  bool send_full_update(net::TcpStream& client) {
    rfb::Bytes reply;
    {
      std::lock_guard lock(mu_);
      advance_to(scene_, steady_now_ms());
      Frame frame = render(scene_);
      reply = rfb::encode_framebuffer_update_header(1);
      rfb::Bytes rect = rfb::encode_rect_header(
          0, 0, static_cast<uint16_t>(frame.width),
          static_cast<uint16_t>(frame.height), rfb::encoding_raw);
      reply.insert(reply.end(), rect.begin(), rect.end());
      rfb::append_raw_pixels(reply, frame, {0, 0, frame.width, frame.height},
                             pixel_format_);
    }
    return client.write_all(reply);
  }

  mutable std::mutex mu_;
  Scene scene_;
  ServerStats stats_;
  rfb::PixelFormat pixel_format_;

  net::TcpListener listener_;
  std::thread thread_;
  std::atomic<bool> stopping_{false};

  std::mutex client_mu_;
  net::TcpStream* client_ = nullptr;
};

} // namespace

std::unique_ptr<Server> serve(Scene scene, int port) {
  return std::make_unique<ServerImpl>(std::move(scene), port);
}

} // namespace usim::simdesk
