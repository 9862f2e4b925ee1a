#pragma once

#include <memory>
#include <string>

#include "usim/frame.hpp"
#include "usim/rfb_wire.hpp"

namespace usim::channel {

struct Endpoint {
  std::string host;
  int port = 0;

  bool valid() const { return !host.empty() && port >= 1 && port <= 65535; }
};

// Lowest abstraction layer: capture-frame / send-pointer / send-key over
// one transport. RFB is the only backend built in; Qemu-Monitor and
// in-guest agents are future implementations of this same interface.
class Session {
 public:
  virtual ~Session() = default;

  virtual int width() const = 0;
  virtual int height() const = 0;
  virtual std::string desktop_name() const = 0;

  // Full-screen capture; the returned frame equals the server-side
  // framebuffer at some instant during the call.
  virtual Frame capture_frame() = 0;

  // x/y must satisfy 0 <= x < width, 0 <= y < height. Rejected with
  // coordinates-out-of-range before anything hits the wire.
  virtual void send_pointer(const PointerEvent& event) = 0;
  virtual void send_key(const KeyEvent& event) = 0;

  virtual void close() = 0;
};

// RFB 3.8 / security None / Raw encoding. Throws Error with
// connection-refused, protocol-version-mismatch or
// security-negotiation-failed, each carrying the offending bytes.
std::unique_ptr<Session> connect(const Endpoint& endpoint);

} // namespace usim::channel
