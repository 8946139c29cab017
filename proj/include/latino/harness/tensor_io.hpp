#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "latino/error.hpp"
#include "latino/sae/protocol.hpp"
#include "latino/tensor.hpp"

namespace latino {

// Tensor file: "LTEN" | version u8 (=1) | ndim u8 | dims u32 LE | float32 LE
// data, row-major. Same tensor body as the prior wire protocol.

inline constexpr char kTensorMagic[4] = {'L', 'T', 'E', 'N'};
inline constexpr std::uint8_t kTensorVersion = 1;

inline std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  wire::Writer w;
  for (char ch : kTensorMagic) w.u8(static_cast<std::uint8_t>(ch));
  w.u8(kTensorVersion);
  try {
    w.tensor(t);
  } catch (const ProtocolError& e) {
    throw IoError(e.what());
  }
  return w.take();
}

inline Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 5) throw IoError("truncated payload");
  for (int i = 0; i < 4; ++i)
    if (bytes[static_cast<std::size_t>(i)] != static_cast<std::uint8_t>(kTensorMagic[i]))
      throw IoError("not a tensor file (bad magic)");
  if (bytes[4] != kTensorVersion)
    throw IoError("unsupported tensor file version " + std::to_string(bytes[4]));
  wire::Reader r(bytes);
  for (int i = 0; i < 5; ++i) r.u8();
  Tensor t;
  try {
    t = r.tensor();
    r.expect_end();
  } catch (const ProtocolError& e) {
    throw IoError(e.what());
  }
  return t;
}

inline void save_tensor(const std::string& path, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline void save_tensor(const std::string& path, const Array& a) {
  save_tensor(path, tensor_cast<float>(a));
}

inline Tensor load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), {});
  try {
    return decode_tensor(bytes);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

inline Array load_array(const std::string& path) { return tensor_cast<double>(load_tensor(path)); }

}  // namespace latino
