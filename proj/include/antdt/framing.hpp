#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>

#include "antdt/types.hpp"

namespace antdt {

// Length-prefixed JSON framing over a stream socket: 4-byte big-endian body
// length followed by a UTF-8 JSON document.
std::string encode_frame(const json& body);

// Blocking frame reader over a connected fd. Returns false on clean EOF.
bool read_frame(int fd, json* out);
bool write_frame(int fd, const json& body);

// Minimal single-threaded request/response server for the framed protocol.
// One handler call per frame; connections are served one at a time, which is
// all the in-process tests and the dds-serve tool need.
class FramedServer {
 public:
  using Handler = std::function<json(const json&)>;

  FramedServer(const std::string& host, std::uint16_t port, Handler handler);
  ~FramedServer();

  std::uint16_t port() const { return port_; }
  void stop();

 private:
  void serve();

  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  Handler handler_;
  std::atomic<bool> stop_{false};
  std::thread thread_;
};

// Framed client for tests and tooling.
class FramedClient {
 public:
  FramedClient(const std::string& host, std::uint16_t port);
  ~FramedClient();
  json call(const json& request);

 private:
  int fd_ = -1;
};

}  // namespace antdt
