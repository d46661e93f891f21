// Copyright 2026 The histoexpr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// PNG (libpng simplified API) and binary PPM.

#include <cctype>
#include <cstring>

#include <png.h>

#include "csv.hpp"
#include "histoexpr/error.hpp"
#include "histoexpr/imageprep.hpp"

namespace histoexpr {

RgbImage read_png(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw Error(ErrorCode::ImageDecode, path.string() + ": " + img.message);
  img.format = PNG_FORMAT_RGB;
  RgbImage out(static_cast<int>(img.width), static_cast<int>(img.height));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw Error(ErrorCode::ImageDecode, path.string() + ": " + msg);
  }
  return out;
}

void write_png(const RgbImage& image, const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels.data(), 0, nullptr))
    throw Error(ErrorCode::Io, path.string() + ": " + img.message);
}

RgbImage read_ppm(const std::filesystem::path& path) {
  const std::string data = detail::read_text(path);
  std::size_t pos = 0;
  auto skip = [&] {
    while (pos < data.size()) {
      if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&] {
    skip();
    long v = 0;
    const std::size_t start = pos;
    while (pos < data.size() && std::isdigit(static_cast<unsigned char>(data[pos])) && v < 1'000'000)
      v = v * 10 + (data[pos++] - '0');
    if (pos == start) throw Error(ErrorCode::ImageDecode, path.string() + ": malformed PPM header");
    return v;
  };
  if (data.compare(0, 2, "P6") != 0) throw Error(ErrorCode::ImageDecode, path.string() + ": not a binary PPM");
  pos = 2;
  const long w = number(), h = number(), maxval = number();
  if (w <= 0 || h <= 0) throw Error(ErrorCode::ImageDecode, path.string() + ": zero-sized PPM");
  if (maxval != 255) throw Error(ErrorCode::ImageDecode, path.string() + ": only 8-bit PPM is supported");
  if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos])))
    throw Error(ErrorCode::ImageDecode, path.string() + ": malformed PPM header");
  ++pos;
  RgbImage out(static_cast<int>(w), static_cast<int>(h));
  if (data.size() - pos < out.pixels.size()) throw Error(ErrorCode::ImageDecode, path.string() + ": truncated PPM");
  std::memcpy(out.pixels.data(), data.data() + pos, out.pixels.size());
  return out;
}

void write_ppm(const RgbImage& image, const std::filesystem::path& path) {
  std::string text = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  text.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  detail::write_text(path, text);
}

RgbImage read_image(const std::filesystem::path& path) {
  const std::string head = detail::read_text(path).substr(0, 8);
  if (head.size() >= 2 && head[0] == 'P' && head[1] == '6') return read_ppm(path);
  if (head.size() == 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(head.data()), 0, 8) == 0)
    return read_png(path);
  throw Error(ErrorCode::ImageDecode, path.string() + ": neither PNG nor binary PPM");
}

Mask read_mask(const std::filesystem::path& path) {
  const RgbImage img = read_image(path);
  Mask m{img.width, img.height, std::vector<std::uint8_t>(img.pixel_count())};
  for (std::size_t i = 0; i < img.pixel_count(); ++i)
    m.values[i] = (img.pixels[3 * i] | img.pixels[3 * i + 1] | img.pixels[3 * i + 2]) != 0;
  return m;
}

}  // namespace histoexpr
