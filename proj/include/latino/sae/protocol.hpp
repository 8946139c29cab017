#pragma once

#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "latino/error.hpp"
#include "latino/tensor.hpp"

// Prior wire protocol. Every message is a frame
//
//   "LPRO" | version u8 (=1) | opcode u8 | payload length u32 LE | payload
//
// and tensors inside payloads are ndim u8, dims u32 LE, then float32 LE data.
// Requests and replies share the opcode; a failed request is answered with
// ERROR carrying a UTF-8 message.
//
//   HELLO        ()                                    -> latent shape, cond_dim u32,
//                                                         count u32, timesteps u32...
//   ENCODE       (x)                                   -> z
//   DECODE       (z)                                   -> x
//   CONSISTENCY  (z_t, t u32, c)                       -> z_0
//   GRAD_LOGCOND (z_next, z_prev, t_prev u32, t_next u32, c)
//                                                      -> status u8 (0 ok + g, 1 unsupported)
namespace latino::wire {

inline constexpr std::array<std::uint8_t, 4> kMagic{'L', 'P', 'R', 'O'};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::uint32_t kMaxPayload = 1u << 30;
inline constexpr std::size_t kHeaderSize = 10;

enum class Opcode : std::uint8_t {
  hello = 0x01,
  encode = 0x02,
  decode = 0x03,
  consistency = 0x04,
  grad_logcond = 0x05,
  error = 0x7F,
};

enum class GradStatus : std::uint8_t { ok = 0, unsupported = 1 };

struct Frame {
  Opcode op{};
  std::vector<std::uint8_t> payload;
};

class Writer {
 public:
  Writer& u8(std::uint8_t v) {
    buf_.push_back(v);
    return *this;
  }
  Writer& u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    return *this;
  }
  Writer& f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    return u32(bits);
  }
  Writer& shape(const Shape& s) {
    if (s.empty() || s.size() > 255) throw ProtocolError("tensor rank must be in [1,255]");
    u8(static_cast<std::uint8_t>(s.size()));
    for (std::size_t e : s) {
      if (e > 0xffffffffu) throw ProtocolError("tensor extent exceeds u32");
      u32(static_cast<std::uint32_t>(e));
    }
    return *this;
  }
  Writer& tensor(const Tensor& t) {
    shape(t.shape());
    for (float v : t.values()) f32(v);
    return *this;
  }
  Writer& tensor(const Array& a) { return tensor(tensor_cast<float>(a)); }
  Writer& text(const std::string& s) {
    buf_.insert(buf_.end(), s.begin(), s.end());
    return *this;
  }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& buf) : buf_(buf) {}

  std::uint8_t u8() {
    need(1);
    return buf_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  Shape shape() {
    const std::size_t nd = u8();
    if (nd == 0) throw ProtocolError("tensor rank 0 not allowed");
    Shape s(nd);
    for (auto& e : s) {
      e = u32();
      if (e == 0) throw ProtocolError("tensor extent 0 not allowed");
    }
    return s;
  }
  Tensor tensor() {
    Shape s = shape();
    std::size_t n = 1;
    const std::size_t avail = (buf_.size() - pos_) / 4;
    for (std::size_t e : s)
      if (__builtin_mul_overflow(n, e, &n) || n > avail) throw ProtocolError("truncated payload");
    std::vector<float> data(n);
    for (auto& v : data) v = f32();
    try {
      return Tensor(std::move(s), std::move(data));
    } catch (const Error& e) {
      throw ProtocolError(std::string("bad tensor: ") + e.what());
    }
  }
  std::string rest_text() {
    std::string s(buf_.begin() + static_cast<std::ptrdiff_t>(pos_), buf_.end());
    pos_ = buf_.size();
    return s;
  }
  void expect_end() const {
    if (pos_ != buf_.size()) throw ProtocolError("trailing bytes in payload");
  }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw ProtocolError("truncated payload");
  }
  const std::vector<std::uint8_t>& buf_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> encode_frame(const Frame& f) {
  if (f.payload.size() > kMaxPayload) throw ProtocolError("payload too large");
  Writer w;
  for (auto b : kMagic) w.u8(b);
  w.u8(kVersion).u8(static_cast<std::uint8_t>(f.op)).u32(static_cast<std::uint32_t>(f.payload.size()));
  auto out = w.take();
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

// Byte stream endpoint. Implementations must be used by one thread at a time.
class Stream {
 public:
  virtual ~Stream() = default;
  // Reads exactly n bytes. Returns false on end-of-stream before the first
  // byte; throws on a partial read.
  virtual bool read_exact(std::uint8_t* dst, std::size_t n) = 0;
  virtual void write_all(const std::uint8_t* src, std::size_t n) = 0;
};

class FdStream : public Stream {
 public:
  FdStream(int in_fd, int out_fd, bool owns) : in_(in_fd), out_(out_fd), owns_(owns) {}
  ~FdStream() override {
    if (!owns_) return;
    ::close(in_);
    if (out_ != in_) ::close(out_);
  }
  FdStream(const FdStream&) = delete;
  FdStream& operator=(const FdStream&) = delete;

  bool read_exact(std::uint8_t* dst, std::size_t n) override {
    std::size_t got = 0;
    while (got < n) {
      const ssize_t r = ::read(in_, dst + got, n - got);
      if (r < 0 && errno == EINTR) continue;
      if (r < 0) throw ProtocolError(std::string("read failed: ") + std::strerror(errno));
      if (r == 0) {
        if (got == 0) return false;
        throw ProtocolError("connection closed mid-frame");
      }
      got += static_cast<std::size_t>(r);
    }
    return true;
  }

  void write_all(const std::uint8_t* src, std::size_t n) override {
    std::size_t put = 0;
    while (put < n) {
      const ssize_t r = ::write(out_, src + put, n - put);
      if (r < 0 && errno == EINTR) continue;
      if (r < 0) throw ProtocolError(std::string("write failed: ") + std::strerror(errno));
      put += static_cast<std::size_t>(r);
    }
  }

 protected:
  int in_, out_;
  bool owns_;
};

inline void write_frame(Stream& s, const Frame& f) {
  const auto bytes = encode_frame(f);
  s.write_all(bytes.data(), bytes.size());
}

// Empty on clean end-of-stream.
inline std::optional<Frame> read_frame(Stream& s) {
  std::array<std::uint8_t, kHeaderSize> h{};
  if (!s.read_exact(h.data(), 1)) return std::nullopt;
  if (!s.read_exact(h.data() + 1, kHeaderSize - 1)) throw ProtocolError("truncated frame header");
  if (!std::equal(kMagic.begin(), kMagic.end(), h.begin())) throw ProtocolError("bad magic");
  if (h[4] != kVersion)
    throw ProtocolError("unsupported protocol version " + std::to_string(h[4]));
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(h[6 + i]) << (8 * i);
  if (len > kMaxPayload) throw ProtocolError("payload length " + std::to_string(len) + " too large");
  Frame f;
  f.op = static_cast<Opcode>(h[5]);
  f.payload.resize(len);
  if (len && !s.read_exact(f.payload.data(), len)) throw ProtocolError("truncated frame payload");
  return f;
}

inline Frame error_frame(const std::string& msg) {
  return {Opcode::error, std::vector<std::uint8_t>(msg.begin(), msg.end())};
}

// TCP client connection.
inline std::unique_ptr<Stream> connect_tcp(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res);
  if (rc != 0) throw ProtocolError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  int fd = -1;
  for (addrinfo* p = res; p; p = p->ai_next) {
    fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw ProtocolError("cannot connect to " + host + ":" + std::to_string(port));
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return std::make_unique<FdStream>(fd, fd, true);
}

// Listening socket on 127.0.0.1 (port 0 picks a free port). Returns the fd and
// the bound port.
inline std::pair<int, int> listen_tcp(int port, const std::string& host = "127.0.0.1") {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw ProtocolError("socket failed");
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  addrinfo hints{};
  hints.ai_family = AF_INET;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res) {
    ::close(fd);
    throw ProtocolError("cannot resolve listen address " + host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 8) != 0) {
    ::close(fd);
    throw ProtocolError("cannot listen on " + host + ":" + std::to_string(port) + ": " +
                        std::strerror(errno));
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  return {fd, ntohs(addr.sin_port)};
}

// Child process speaking the protocol on its stdin/stdout.
class ChildStream final : public FdStream {
 public:
  ChildStream(int in_fd, int out_fd, pid_t pid) : FdStream(in_fd, out_fd, true), pid_(pid) {}
  ~ChildStream() override {
    ::close(out_);  // EOF on the child's stdin ends its serve loop
    out_ = in_;
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }

 private:
  pid_t pid_;
};

// Spawns argv[0] with pipes on stdin/stdout. SIGPIPE is ignored process-wide
// so a dead child surfaces as a write error instead of killing the caller.
inline std::unique_ptr<Stream> spawn_stdio(const std::vector<std::string>& argv) {
  if (argv.empty()) throw InvalidArgument("empty command for stdio prior");
  int to_child[2], from_child[2];
  if (::pipe(to_child) != 0) throw ProtocolError("pipe failed");
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]), ::close(to_child[1]);
    throw ProtocolError("pipe failed");
  }
  ::signal(SIGPIPE, SIG_IGN);
  const pid_t pid = ::fork();
  if (pid < 0) throw ProtocolError("fork failed");
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]), ::close(to_child[1]), ::close(from_child[0]), ::close(from_child[1]);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::make_unique<ChildStream>(from_child[0], to_child[1], pid);
}

}  // namespace latino::wire
