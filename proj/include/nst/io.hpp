#pragma once

#include <png.h>

#include <array>
#include <bit>
#include <cctype>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "nst/core.hpp"

namespace nst {

enum class ImageFormat { Pgm8, Txf };

namespace io_detail {

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline void put_u32le(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

class PgmHeaderReader {
 public:
  explicit PgmHeaderReader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  std::size_t next_uint() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) throw IoError("truncated file: bad PGM header");
    std::size_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > (1u << 30)) throw IoError("PGM header value out of range");
    }
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size()) throw IoError("truncated file: missing PGM raster");
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 2;
};

inline GrayImage decode_pgm(const std::vector<unsigned char>& bytes) {
  PgmHeaderReader header(bytes);
  const std::size_t width = header.next_uint();
  const std::size_t height = header.next_uint();
  const std::size_t maxval = header.next_uint();
  if (width == 0 || height == 0) throw IoError("zero dimension in PGM header");
  if (maxval == 0 || maxval > 65535) throw IoError("unsupported PGM maxval");
  const std::size_t offset = header.raster_offset();
  const std::size_t sample_bytes = maxval < 256 ? 1 : 2;
  if (offset > bytes.size() || height > (bytes.size() - offset) / sample_bytes / width)
    throw IoError("truncated file: PGM raster too short");
  const std::size_t count = width * height;
  std::vector<double> data(count);
  const unsigned char* p = bytes.data() + offset;
  for (std::size_t i = 0; i < count; ++i) {
    // 16-bit PGM samples are big-endian.
    const std::size_t v = sample_bytes == 1 ? p[i] : (std::size_t{p[2 * i]} << 8) | p[2 * i + 1];
    data[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return GrayImage(width, height, std::move(data));
}

inline GrayImage decode_txf(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 12) throw IoError("truncated file: TXF header");
  const auto width = static_cast<std::size_t>(get_le(bytes.data() + 4, 4));
  const auto height = static_cast<std::size_t>(get_le(bytes.data() + 8, 4));
  if (width == 0 || height == 0) throw IoError("zero dimension in TXF header");
  if (height > (bytes.size() - 12) / 8 / width) throw IoError("truncated file: TXF payload");
  const std::size_t count = width * height;
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i)
    data[i] = std::bit_cast<double>(get_le(bytes.data() + 12 + 8 * i, 8));
  return GrayImage(width, height, std::move(data));
}

struct PngMemorySource {
  const std::vector<unsigned char>* bytes;
  std::size_t pos;
};

inline void png_read_from_memory(png_structp png, png_bytep out, png_size_t length) {
  auto* src = static_cast<PngMemorySource*>(png_get_io_ptr(png));
  if (src->pos + length > src->bytes->size()) png_error(png, "truncated file");
  std::memcpy(out, src->bytes->data() + src->pos, length);
  src->pos += length;
}

inline GrayImage decode_png(const std::vector<unsigned char>& bytes) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialization failed");
  }
  // libpng errors longjmp back into this frame; everything below is declared
  // before setjmp so no destructor is skipped.
  PngMemorySource src{&bytes, 0};
  std::vector<double> data;
  std::vector<unsigned char> raster;
  std::vector<png_bytep> rows;
  std::string failure;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("truncated file: corrupt PNG stream");
  }
  png_set_read_fn(png, &src, png_read_from_memory);
  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (color_type != PNG_COLOR_TYPE_GRAY) {
    failure = "unsupported format: PNG is not single-channel grayscale";
  } else {
    if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    raster.resize(rowbytes * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = raster.data() + y * rowbytes;
    png_read_image(png, rows.data());
    data.resize(std::size_t{width} * height);
    const double scale = bit_depth == 16 ? 65535.0 : 255.0;
    for (png_uint_32 y = 0; y < height; ++y) {
      const unsigned char* p = rows[y];
      for (png_uint_32 x = 0; x < width; ++x) {
        // PNG stores 16-bit samples big-endian.
        const unsigned v = bit_depth == 16 ? (unsigned{p[2 * x]} << 8) | p[2 * x + 1] : p[x];
        data[std::size_t{y} * width + x] = v / scale;
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (!failure.empty()) throw IoError(failure);
  return GrayImage(width, height, std::move(data));
}

}  // namespace io_detail

/// Loads binary PGM (8/16-bit), grayscale PNG, or TXF. Integer formats map to [0, 1].
/// Decodes P5 PGM, TXF or grayscale PNG bytes, detected by magic number.
inline GrayImage decode_image(const std::vector<unsigned char>& bytes) {
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return io_detail::decode_pgm(bytes);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), "TXF1", 4) == 0) return io_detail::decode_txf(bytes);
  static constexpr std::array<unsigned char, 8> kPngMagic = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngMagic.data(), 8) == 0)
    return io_detail::decode_png(bytes);
  throw IoError("unsupported format");
}

inline GrayImage load_image(const std::filesystem::path& path) {
  const auto bytes = io_detail::read_file(path);
  try {
    return decode_image(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

inline std::vector<unsigned char> encode_image(const GrayImage& img, ImageFormat format) {
  std::vector<unsigned char> out;
  if (format == ImageFormat::Txf) {
    out = {'T', 'X', 'F', '1'};
    out.reserve(12 + 8 * img.size());
    io_detail::put_u32le(out, static_cast<std::uint32_t>(img.width()));
    io_detail::put_u32le(out, static_cast<std::uint32_t>(img.height()));
    for (double v : img.pixels()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
    }
    return out;
  }
  const std::string header =
      "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  out.assign(header.begin(), header.end());
  for (double v : img.pixels())
    out.push_back(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  return out;
}

inline void save_image(const GrayImage& img, const std::filesystem::path& path, ImageFormat format) {
  io_detail::write_file(path, encode_image(img, format));
}

/// Picks TXF for ".txf" and 8-bit PGM for ".pgm"; anything else is a usage error.
inline ImageFormat format_from_extension(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".txf") return ImageFormat::Txf;
  if (ext == ".pgm") return ImageFormat::Pgm8;
  throw UsageError("cannot infer output format from extension '" + ext + "' (use .txf or .pgm)");
}

inline void save_image(const GrayImage& img, const std::filesystem::path& path) {
  save_image(img, path, format_from_extension(path));
}

}  // namespace nst
