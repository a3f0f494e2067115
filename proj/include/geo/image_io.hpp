#pragma once

// PNG (via libpng's simplified API) and binary PNM image I/O.

#include <png.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "geo/error.hpp"
#include "geo/raster.hpp"

namespace geo {

namespace detail {

inline std::string lower_ext(const std::filesystem::path& p) {
  auto e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

inline Raster decode_png(const std::string& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw UnsupportedFormat(path + ": " + img.message);
  img.format = PNG_FORMAT_RGB;
  if (img.width < 1 || img.height < 1 || img.width > 32768 || img.height > 32768) {
    png_image_free(&img);
    throw UnsupportedFormat(path + ": unsupported PNG dimensions");
  }
  Raster r(static_cast<int>(img.width), static_cast<int>(img.height));
  png_color background{255, 255, 255};
  if (!png_image_finish_read(&img, &background, r.bytes().data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw UnsupportedFormat(path + ": " + msg);
  }
  return r;
}

inline void encode_png(const Raster& r, const std::string& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(r.width());
  img.height = static_cast<png_uint_32>(r.height());
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, r.bytes().data(), 0, nullptr))
    throw IoFailure(path + ": " + img.message);
}

inline std::string read_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok += c;
  }
  return tok;
}

inline Raster decode_pnm(const std::string& path, std::istream& in) {
  auto magic = read_token(in);
  if (magic != "P5" && magic != "P6") throw UnsupportedFormat(path + ": not a binary PGM/PPM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(read_token(in));
    h = std::stoi(read_token(in));
    maxval = std::stoi(read_token(in));
  } catch (const std::exception&) {
    throw UnsupportedFormat(path + ": malformed PNM header");
  }
  if (w < 1 || h < 1 || maxval != 255) throw UnsupportedFormat(path + ": only 8-bit PNM supported");
  const std::size_t channels = magic == "P5" ? 1 : 3;
  std::vector<unsigned char> data(static_cast<std::size_t>(w) * h * channels);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (in.gcount() != static_cast<std::streamsize>(data.size()))
    throw UnsupportedFormat(path + ": truncated PNM data");
  Raster r(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * w + x) * channels;
      if (channels == 1) r.set(x, y, {data[i], data[i], data[i]});
      else r.set(x, y, {data[i], data[i + 1], data[i + 2]});
    }
  return r;
}

}  // namespace detail

inline Raster load_raster(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open '" + path.string() + "'");
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  const auto got = in.gcount();
  if (got == 8 && png_sig_cmp(sig, 0, 8) == 0) {
    in.close();
    return detail::decode_png(path.string());
  }
  if (got >= 2 && sig[0] == 'P' && (sig[1] == '5' || sig[1] == '6')) {
    in.clear();
    in.seekg(0);
    return detail::decode_pnm(path.string(), in);
  }
  throw UnsupportedFormat("'" + path.string() + "': unrecognized image format");
}

// Format chosen by extension: .png (RGB), .pgm (luma), .ppm (RGB).
inline void save_raster(const Raster& r, const std::filesystem::path& path) {
  const auto ext = detail::lower_ext(path);
  if (ext == ".png") {
    detail::encode_png(r, path.string());
    return;
  }
  if (ext != ".pgm" && ext != ".ppm")
    throw UnsupportedFormat("'" + path.string() + "': unsupported output extension");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot write '" + path.string() + "'");
  const bool gray = ext == ".pgm";
  out << (gray ? "P5\n" : "P6\n") << r.width() << " " << r.height() << "\n255\n";
  if (gray) {
    std::vector<char> row(static_cast<std::size_t>(r.width()));
    for (int y = 0; y < r.height(); ++y) {
      for (int x = 0; x < r.width(); ++x) row[x] = static_cast<char>(r.luma(x, y));
      out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
  } else {
    out.write(reinterpret_cast<const char*>(r.bytes().data()),
              static_cast<std::streamsize>(r.bytes().size()));
  }
  if (!out) throw IoFailure("short write to '" + path.string() + "'");
}

// In-memory PNG encoding, used for agent image attachments.
inline std::vector<unsigned char> encode_png_bytes(const Raster& r) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(r.width());
  img.height = static_cast<png_uint_32>(r.height());
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, r.bytes().data(), 0, nullptr))
    throw IoFailure(std::string("png encode: ") + img.message);
  std::vector<unsigned char> buf(size);
  if (!png_image_write_to_memory(&img, buf.data(), &size, 0, r.bytes().data(), 0, nullptr))
    throw IoFailure(std::string("png encode: ") + img.message);
  buf.resize(size);
  return buf;
}

}  // namespace geo
