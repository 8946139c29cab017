#pragma once

#include <algorithm>
#include <atomic>
#include <iostream>
#include <sstream>
#include <thread>

#include "latino/sae/protocol.hpp"

namespace latino {

// Protocol test server with no model behind it: ENCODE, DECODE and
// CONSISTENCY return their latent argument unchanged, GRAD_LOGCOND answers
// UNSUPPORTED.
struct EchoConfig {
  Shape latent_shape{1, 8, 8};
  std::uint32_t cond_dim = 4;
  std::vector<int> timesteps{999, 874, 749, 624, 499, 374, 249, 124};
};

inline wire::Frame echo_handle(const EchoConfig& cfg, const wire::Frame& req) {
  using wire::Opcode;
  wire::Reader r(req.payload);
  wire::Writer w;
  switch (req.op) {
    case Opcode::hello:
      r.expect_end();
      w.shape(cfg.latent_shape).u32(cfg.cond_dim).u32(static_cast<std::uint32_t>(cfg.timesteps.size()));
      for (int t : cfg.timesteps) w.u32(static_cast<std::uint32_t>(t));
      return {req.op, w.take()};
    case Opcode::encode:
    case Opcode::decode: {
      const Tensor x = r.tensor();
      r.expect_end();
      return {req.op, w.tensor(x).take()};
    }
    case Opcode::consistency: {
      const Tensor z = r.tensor();
      const std::uint32_t t = r.u32();
      const Tensor c = r.tensor();
      r.expect_end();
      if (std::find(cfg.timesteps.begin(), cfg.timesteps.end(), static_cast<int>(t)) ==
          cfg.timesteps.end())
        return wire::error_frame("unsupported timestep " + std::to_string(t));
      if (z.shape() != cfg.latent_shape)
        return wire::error_frame("latent shape " + shape_string(z.shape()) + " expected " +
                                 shape_string(cfg.latent_shape));
      if (c.shape() != Shape{cfg.cond_dim}) return wire::error_frame("cond shape mismatch");
      return {req.op, w.tensor(z).take()};
    }
    case Opcode::grad_logcond:
      return {req.op, w.u8(static_cast<std::uint8_t>(wire::GradStatus::unsupported)).take()};
    case Opcode::error:
      break;
  }
  std::ostringstream os;
  os << "unsupported opcode 0x" << std::hex << static_cast<int>(req.op);
  return wire::error_frame(os.str());
}

// Answers frames until end-of-stream. Malformed payloads get an ERROR reply;
// a broken frame header cannot be resynchronized, so it ends the session
// after an ERROR reply.
inline void serve_echo(wire::Stream& s, const EchoConfig& cfg) {
  for (;;) {
    std::optional<wire::Frame> req;
    try {
      req = wire::read_frame(s);
    } catch (const ProtocolError& e) {
      try {
        wire::write_frame(s, wire::error_frame(e.what()));
      } catch (const ProtocolError&) {
      }
      return;
    }
    if (!req) return;
    wire::Frame reply;
    try {
      reply = echo_handle(cfg, *req);
    } catch (const Error& e) {
      reply = wire::error_frame(e.what());
    }
    wire::write_frame(s, reply);
  }
}

// Accept loop on a listening socket; one thread per connection. Returns when
// `stop` is set and a connection (or shutdown) wakes accept.
inline void serve_echo_tcp(int listen_fd, const EchoConfig& cfg, const std::atomic<bool>& stop) {
  while (!stop) {
    const int fd = ::accept(listen_fd, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    std::thread([fd, cfg] {
      wire::FdStream s(fd, fd, true);
      try {
        serve_echo(s, cfg);
      } catch (const std::exception& e) {
        std::cerr << "echo connection: " << e.what() << "\n";
      }
    }).detach();
  }
}

}  // namespace latino
