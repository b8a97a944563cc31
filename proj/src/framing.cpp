#include "antdt/framing.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <stdexcept>

#include "antdt/error.hpp"

namespace antdt {

std::string encode_frame(const json& body) {
  const std::string payload = body.dump();
  const std::uint32_t len = htonl(static_cast<std::uint32_t>(payload.size()));
  std::string out(reinterpret_cast<const char*>(&len), 4);
  out += payload;
  return out;
}

namespace {

bool read_exact(int fd, char* buf, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::read(fd, buf + got, n - got);
    if (r == 0) return false;  // EOF
    if (r < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

bool write_all(int fd, const char* buf, std::size_t n) {
  std::size_t sent = 0;
  while (sent < n) {
    const ssize_t r = ::write(fd, buf + sent, n - sent);
    if (r < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    sent += static_cast<std::size_t>(r);
  }
  return true;
}

}  // namespace

bool read_frame(int fd, json* out) {
  std::uint32_t len_be = 0;
  if (!read_exact(fd, reinterpret_cast<char*>(&len_be), 4)) return false;
  const std::uint32_t len = ntohl(len_be);
  if (len > (64u << 20)) throw ProtocolError("frame too large");
  std::string payload(len, '\0');
  if (!read_exact(fd, payload.data(), len)) return false;
  *out = json::parse(payload);
  return true;
}

bool write_frame(int fd, const json& body) {
  const std::string frame = encode_frame(body);
  return write_all(fd, frame.data(), frame.size());
}

FramedServer::FramedServer(const std::string& host, std::uint16_t port, Handler handler)
    : handler_(std::move(handler)) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error("socket() failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw std::runtime_error("bad host: " + host);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0)
    throw std::runtime_error("bind() failed");
  if (::listen(listen_fd_, 16) < 0) throw std::runtime_error("listen() failed");

  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);

  thread_ = std::thread([this] { serve(); });
}

FramedServer::~FramedServer() { stop(); }

void FramedServer::stop() {
  if (stop_.exchange(true)) return;
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  if (thread_.joinable()) thread_.join();
}

void FramedServer::serve() {
  while (!stop_.load()) {
    const int conn = ::accept(listen_fd_, nullptr, nullptr);
    if (conn < 0) {
      if (stop_.load()) break;
      continue;
    }
    json req;
    while (!stop_.load() && read_frame(conn, &req)) {
      json resp;
      try {
        resp = handler_(req);
      } catch (const std::exception& e) {
        resp = json{{"error", e.what()}};
      }
      if (!write_frame(conn, resp)) break;
    }
    ::close(conn);
  }
}

FramedClient::FramedClient(const std::string& host, std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw std::runtime_error("socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) throw std::runtime_error("bad host: " + host);
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0)
    throw std::runtime_error("connect() failed");
}

FramedClient::~FramedClient() {
  if (fd_ >= 0) ::close(fd_);
}

json FramedClient::call(const json& request) {
  if (!write_frame(fd_, request)) throw std::runtime_error("write failed");
  json resp;
  if (!read_frame(fd_, &resp)) throw std::runtime_error("connection closed");
  return resp;
}

}  // namespace antdt
