#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "latino/error.hpp"
#include "latino/tensor.hpp"

namespace latino {

// 8-bit PNG <-> (C,H,W) image in [0,1]. Grayscale files give C = 1, colour
// files C = 3 (alpha is composited away by libpng's simplified API).

inline std::uint8_t quantize_u8(double v) {
  // Round half up on the clamped value.
  return static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5));
}

inline Tensor load_image(const std::string& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw IoError("cannot read PNG '" + path + "': " + img.message);
  const bool colour = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = colour ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::size_t C = colour ? 3 : 1, H = img.height, W = img.width;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError("corrupt PNG '" + path + "': " + msg);
  }
  Tensor out({C, H, W});
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j)
      for (std::size_t c = 0; c < C; ++c)
        out(c, i, j) = static_cast<float>(buf[(i * W + j) * C + c]) / 255.0f;
  return out;
}

template <class T>
void save_image(const std::string& path, const BasicTensor<T>& x) {
  if (x.rank() != 3 || (x.channels() != 1 && x.channels() != 3))
    throw ShapeError("save_image needs a (1|3,H,W) tensor, got " + shape_string(x.shape()));
  const std::size_t C = x.channels(), H = x.height(), W = x.width();
  std::vector<std::uint8_t> buf(C * H * W);
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j)
      for (std::size_t c = 0; c < C; ++c)
        buf[(i * W + j) * C + c] = quantize_u8(static_cast<double>(x(c, i, j)));
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(W);
  img.height = static_cast<png_uint_32>(H);
  img.format = C == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
    throw IoError("cannot write PNG '" + path + "': " + img.message);
}

inline Array load_image_array(const std::string& path) {
  return tensor_cast<double>(load_image(path));
}

}  // namespace latino
