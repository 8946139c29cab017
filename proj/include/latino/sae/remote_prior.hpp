#pragma once

#include <algorithm>
#include <memory>
#include <mutex>
#include <sstream>

#include "latino/sae/prior.hpp"
#include "latino/sae/protocol.hpp"

namespace latino {

// Prior served by another process over the wire protocol. Owns one
// connection; calls are serialized, so concurrent chains should each open
// their own RemotePrior.
class RemotePrior final : public Prior {
 public:
  explicit RemotePrior(std::unique_ptr<wire::Stream> stream,
                       NoiseSchedule schedule = make_schedule())
      : stream_(std::move(stream)), schedule_(std::move(schedule)) {
    const auto reply = call({wire::Opcode::hello, {}});
    wire::Reader r(reply);
    latent_shape_ = r.shape();
    cond_dim_ = r.u32();
    const std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) timesteps_.push_back(static_cast<int>(r.u32()));
    r.expect_end();
    if (cond_dim_ == 0) throw ProtocolError("server advertised cond_dim 0");
  }

  PriorKind kind() const override { return PriorKind::remote; }
  Shape latent_shape() const override { return latent_shape_; }
  std::size_t cond_dim() const override { return cond_dim_; }
  const NoiseSchedule& schedule() const override { return schedule_; }
  const std::vector<int>& timesteps() const noexcept { return timesteps_; }
  bool supports_timestep(int t) const override {
    return std::find(timesteps_.begin(), timesteps_.end(), t) != timesteps_.end();
  }

  Array encode(const Array& x) const override {
    return tensor_reply(call({wire::Opcode::encode, wire::Writer().tensor(x).take()}));
  }
  Array decode(const Array& z) const override {
    return tensor_reply(call({wire::Opcode::decode, wire::Writer().tensor(z).take()}));
  }
  Array consistency(const Array& z, int t, const Array& c) const override {
    check_cond(c);
    wire::Writer w;
    w.tensor(z).u32(static_cast<std::uint32_t>(t)).tensor(c);
    return tensor_reply(call({wire::Opcode::consistency, w.take()}));
  }

  std::optional<Array> grad_logcond(const Array& z_next, const Array& z_prev, int t_prev,
                                    int t_next, const Array& c) const override {
    {
      std::lock_guard lock(mu_);
      if (grad_unsupported_) return std::nullopt;
    }
    wire::Writer w;
    w.tensor(z_next).tensor(z_prev).u32(static_cast<std::uint32_t>(t_prev))
        .u32(static_cast<std::uint32_t>(t_next)).tensor(c);
    const auto reply = call({wire::Opcode::grad_logcond, w.take()});
    wire::Reader r(reply);
    const auto status = static_cast<wire::GradStatus>(r.u8());
    if (status == wire::GradStatus::unsupported) {
      r.expect_end();
      std::lock_guard lock(mu_);
      grad_unsupported_ = true;
      return std::nullopt;
    }
    if (status != wire::GradStatus::ok) throw ProtocolError("bad GRAD_LOGCOND status");
    Array g = tensor_cast<double>(r.tensor());
    r.expect_end();
    return g;
  }

  // Auto-encoding defect |z - E(D(z))|; measured, never corrected.
  double autoencode_gap(const Array& z) const { return distance(z, encode(decode(z))); }

 private:
  std::vector<std::uint8_t> call(const wire::Frame& req) const {
    std::lock_guard lock(mu_);
    wire::write_frame(*stream_, req);
    auto reply = wire::read_frame(*stream_);
    if (!reply) throw ProtocolError("prior server closed the connection");
    if (reply->op == wire::Opcode::error) {
      wire::Reader r(reply->payload);
      throw ProtocolError("prior server error: " + r.rest_text());
    }
    if (reply->op != req.op) {
      std::ostringstream os;
      os << "reply opcode 0x" << std::hex << int(reply->op) << " for request 0x" << int(req.op);
      throw ProtocolError(os.str());
    }
    return std::move(reply->payload);
  }

  static Array tensor_reply(const std::vector<std::uint8_t>& payload) {
    wire::Reader r(payload);
    Array out = tensor_cast<double>(r.tensor());
    r.expect_end();
    return out;
  }

  std::unique_ptr<wire::Stream> stream_;
  NoiseSchedule schedule_;
  Shape latent_shape_;
  std::size_t cond_dim_ = 0;
  std::vector<int> timesteps_;
  mutable std::mutex mu_;
  mutable bool grad_unsupported_ = false;
};

// "remote:HOST:PORT" or "stdio:CMD [ARGS...]" (whitespace separated).
inline std::shared_ptr<RemotePrior> connect_remote_prior(const std::string& spec) {
  if (spec.rfind("remote:", 0) == 0) {
    const std::string rest = spec.substr(7);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0)
      throw InvalidArgument("remote prior spec must be remote:HOST:PORT, got '" + spec + "'");
    int port = 0;
    try {
      port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw InvalidArgument("bad port in prior spec '" + spec + "'");
    }
    return std::make_shared<RemotePrior>(wire::connect_tcp(rest.substr(0, colon), port));
  }
  if (spec.rfind("stdio:", 0) == 0) {
    std::istringstream is(spec.substr(6));
    std::vector<std::string> argv;
    for (std::string a; is >> a;) argv.push_back(a);
    return std::make_shared<RemotePrior>(wire::spawn_stdio(argv));
  }
  throw InvalidArgument("unknown prior spec '" + spec + "'");
}

}  // namespace latino
