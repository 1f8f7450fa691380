#include "ludvae/image_io.hpp"

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include "ludvae/errors.hpp"

namespace ludvae {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open image: " + path);

  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
    throw IoError("not a PNG file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng init failed: " + path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng init failed: " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("PNG decode error: " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int ch = static_cast<int>(png_get_channels(png, info));
  const int bd = static_cast<int>(png_get_bit_depth(png, info));
  if (ch != 1 && ch != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unsupported channel count in " + path);
  }

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<png_byte> data(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = data.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(ch, h, w);
  if (bd == 8) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < ch; ++c)
          img.at(c, y, x) = static_cast<float>(rows[y][x * ch + c]) / 255.f;
  } else if (bd == 16) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < ch; ++c) {
          const int i = (x * ch + c) * 2;
          const unsigned v = (static_cast<unsigned>(rows[y][i]) << 8) | rows[y][i + 1];
          img.at(c, y, x) = static_cast<float>(v) / 65535.f;
        }
  } else {
    throw IoError("unsupported bit depth in " + path);
  }
  return img;
}

namespace {

void write_png_impl(const std::string& path, const Image& img, int bit_depth) {
  if (img.channels() != 1 && img.channels() != 3)
    throw IoError("PNG write supports 1 or 3 channels: " + path);
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write image: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng init failed: " + path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng init failed: " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encode error: " + path);
  }
  png_init_io(png, fp.get());
  // Fixed settings keep output bytes reproducible run to run.
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  const int color = img.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, img.width(), img.height(), bit_depth, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const int w = img.width(), h = img.height(), ch = img.channels();
  if (bit_depth == 8) {
    std::vector<png_byte> row(static_cast<std::size_t>(w) * ch);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < ch; ++c) row[x * ch + c] = quantize8(img.at(c, y, x));
      png_write_row(png, row.data());
    }
  } else {
    std::vector<png_byte> row(static_cast<std::size_t>(w) * ch * 2);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < ch; ++c) {
          float v = img.at(c, y, x);
          v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
          const unsigned q = static_cast<unsigned>(v * 65535.f + 0.5f);
          row[(x * ch + c) * 2] = static_cast<png_byte>(q >> 8);
          row[(x * ch + c) * 2 + 1] = static_cast<png_byte>(q & 0xff);
        }
      png_write_row(png, row.data());
    }
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png8(const std::string& path, const Image& img) { write_png_impl(path, img, 8); }
void write_png16(const std::string& path, const Image& img) { write_png_impl(path, img, 16); }

void write_npy_float32(const std::string& path, const Image& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write: " + path);
  std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (" +
                     std::to_string(img.height()) + ", " + std::to_string(img.width()) + ", " +
                     std::to_string(img.channels()) + "), }";
  std::size_t header_len = 10 + dict.size() + 1;
  const std::size_t pad = (64 - header_len % 64) % 64;
  dict.append(pad, ' ');
  dict.push_back('\n');
  const std::uint16_t dlen = static_cast<std::uint16_t>(dict.size());
  f.write("\x93NUMPY\x01\x00", 8);
  f.put(static_cast<char>(dlen & 0xff));
  f.put(static_cast<char>(dlen >> 8));
  f.write(dict.data(), dict.size());
  // interleave to HWC on the way out
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) {
        const float v = img.at(c, y, x);
        f.write(reinterpret_cast<const char*>(&v), sizeof(float));
      }
  if (!f) throw IoError("short write: " + path);
}

Image read_npy_float32(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "\x93NUMPY", 6) != 0) throw IoError("not an npy file: " + path);
  unsigned char lo = 0, hi = 0;
  f.read(reinterpret_cast<char*>(&lo), 1);
  f.read(reinterpret_cast<char*>(&hi), 1);
  const std::size_t dlen = lo | (static_cast<std::size_t>(hi) << 8);
  std::string dict(dlen, '\0');
  f.read(dict.data(), static_cast<std::streamsize>(dlen));
  if (dict.find("'<f4'") == std::string::npos || dict.find("False") == std::string::npos)
    throw IoError("unsupported npy layout: " + path);
  const auto open = dict.find('(');
  const auto close = dict.find(')');
  if (open == std::string::npos || close == std::string::npos)
    throw IoError("bad npy header: " + path);
  int dims[3] = {0, 0, 1};
  int nd = 0;
  std::size_t p = open + 1;
  while (p < close && nd < 3) {
    dims[nd++] = std::atoi(dict.c_str() + p);
    const auto comma = dict.find(',', p);
    if (comma == std::string::npos || comma > close) break;
    p = comma + 1;
  }
  if (nd < 2) throw IoError("bad npy shape: " + path);
  Image img(dims[2], dims[0], dims[1]);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) {
        float v;
        f.read(reinterpret_cast<char*>(&v), sizeof(float));
        img.at(c, y, x) = v;
      }
  if (!f) throw IoError("truncated npy: " + path);
  return img;
}

}  // namespace ludvae
