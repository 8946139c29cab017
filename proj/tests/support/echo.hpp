#pragma once

#include <sys/socket.h>

#include <stdexcept>
#include <thread>

#include "latino/harness/echo_server.hpp"

namespace testing_support {

// In-process echo server on one end of a socketpair.
struct EchoPair {
  std::unique_ptr<latino::wire::Stream> client;
  std::thread server;

  explicit EchoPair(const latino::EchoConfig& cfg) {
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, sv) != 0) throw std::runtime_error("socketpair");
    client = std::make_unique<latino::wire::FdStream>(sv[0], sv[0], true);
    server = std::thread([fd = sv[1], cfg] {
      latino::wire::FdStream s(fd, fd, true);
      latino::serve_echo(s, cfg);
    });
  }
  ~EchoPair() {
    client.reset();
    server.join();
  }
};

}  // namespace testing_support
