#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace usim::net {

// Thin RAII wrapper over a connected POSIX TCP socket. Blocking I/O;
// read/write failures surface as Error{session_closed} from callers'
// point of view via the bool/size returns here.
class TcpStream {
 public:
  TcpStream() = default;
  explicit TcpStream(int fd) : fd_(fd) {}
  ~TcpStream();

  TcpStream(TcpStream&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  TcpStream& operator=(TcpStream&& o) noexcept;
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;

  bool valid() const { return fd_ >= 0; }

  // Writes the whole buffer or returns false.
  bool write_all(std::span<const uint8_t> data);
  // Reads exactly n bytes or returns false (EOF/error/shutdown).
  bool read_exact(void* buf, size_t n);

  void close();
  // Unblocks any reader on another thread.
  void shutdown_both();

  int fd() const { return fd_; }

 private:
  int fd_ = -1;
};

// Connects to host:port. On failure returns an invalid stream and sets
// `refused` when the OS reported ECONNREFUSED.
TcpStream connect_tcp(const std::string& host, int port, bool& refused,
                      std::string& detail);

class TcpListener {
 public:
  TcpListener() = default;
  ~TcpListener();

  TcpListener(TcpListener&& o) noexcept : fd_(o.fd_), port_(o.port_) {
    o.fd_ = -1;
  }
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  // Binds 0.0.0.0:port (port 0 picks a free one). `in_use` set on
  // EADDRINUSE.
  bool listen_on(int port, bool& in_use, std::string& detail);

  // Blocks until a client connects; invalid stream once closed.
  TcpStream accept_one();

  void close();

  bool valid() const { return fd_ >= 0; }
  int port() const { return port_; }

 private:
  int fd_ = -1;
  int port_ = 0;
};

} // namespace usim::net
