// SPDX-License-Identifier: Apache-2.0
#include "rei/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>
#include <sstream>
#include <vector>

#include "rei/errors.hpp"

namespace fs = std::filesystem;

namespace rei {

namespace {

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e;
}

void make_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

// Next whitespace-delimited PNM header token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

std::size_t pnm_number(std::istream& in, const fs::path& path) {
  const std::string tok = pnm_token(in);
  try {
    std::size_t pos = 0;
    const unsigned long v = std::stoul(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": bad PGM header field '" + tok + "'");
  }
}

const double* plane_of(const Tensor& image, std::size_t& h, std::size_t& w, std::size_t& channels) {
  if (image.rank() == 2) {
    channels = 1;
    h = image.dim(0);
    w = image.dim(1);
  } else if (image.rank() == 3) {
    channels = image.dim(0);
    h = image.dim(1);
    w = image.dim(2);
  } else {
    throw ShapeError("image writer: expected [H,W] or [C,H,W], got " + shape_string(image.shape()));
  }
  return image.data().data();
}

unsigned char to_byte(double v, double lo, double hi) {
  const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
  return static_cast<unsigned char>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
}

// Decoded 8-bit RGB as doubles in [0,1], channel-interleaved.
struct RawPng {
  std::size_t h = 0, w = 0;
  std::vector<double> rgb;
};

// libpng's simplified API reports errors through return values, so no
// longjmp crosses C++ frames.
RawPng decode_png(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw FormatError(path.string() + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw FormatError(path.string() + ": " + msg);
  }
  RawPng out;
  out.h = image.height;
  out.w = image.width;
  out.rgb.resize(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) out.rgb[i] = buf[i] / 255.0;
  return out;
}

}  // namespace

Tensor read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open");
  const std::string magic = pnm_token(in);
  if (magic != "P5" && magic != "P2") throw FormatError(path.string() + ": not a PGM file");
  const std::size_t w = pnm_number(in, path);
  const std::size_t h = pnm_number(in, path);
  const std::size_t maxval = pnm_number(in, path);
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw FormatError(path.string() + ": bad PGM header");
  Tensor img(Tensor::Shape{h, w});
  const double scale = 1.0 / static_cast<double>(maxval);
  if (magic == "P2") {
    for (std::size_t i = 0; i < h * w; ++i) {
      const std::size_t v = pnm_number(in, path);
      if (v > maxval) throw FormatError(path.string() + ": sample exceeds maxval");
      img[i] = static_cast<double>(v) * scale;
    }
    return img;
  }
  const std::size_t bytes = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> buf(h * w * bytes);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size()) throw FormatError(path.string() + ": truncated PGM data");
  for (std::size_t i = 0; i < h * w; ++i) {
    const std::size_t v = bytes == 1 ? buf[i] : (std::size_t{buf[2 * i]} << 8 | buf[2 * i + 1]);
    img[i] = std::min(static_cast<double>(v) * scale, 1.0);
  }
  return img;
}

Tensor read_png(const fs::path& path) {
  const RawPng p = decode_png(path);
  Tensor img(Tensor::Shape{p.h, p.w});
  for (std::size_t i = 0; i < p.h * p.w; ++i) {
    const double* px = p.rgb.data() + 3 * i;
    img[i] = px[0] == px[1] && px[1] == px[2] ? px[0] : 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
  }
  return img;
}

Tensor read_png_rgb(const fs::path& path) {
  const RawPng p = decode_png(path);
  const std::size_t hw = p.h * p.w;
  Tensor img(Tensor::Shape{3, p.h, p.w});
  for (std::size_t i = 0; i < hw; ++i) {
    for (std::size_t c = 0; c < 3; ++c) img[c * hw + i] = p.rgb[3 * i + c];
  }
  return img;
}

Tensor read_raw(const fs::path& path) {
  fs::path sidecar = path;
  sidecar.replace_extension(".json");
  std::ifstream meta(sidecar);
  if (!meta) throw FormatError(path.string() + ": missing sidecar " + sidecar.string());
  Tensor::Shape shape;
  try {
    const auto j = nlohmann::json::parse(meta);
    if (j.value("dtype", std::string("f64le")) != "f64le") throw FormatError(sidecar.string() + ": dtype must be f64le");
    shape = j.at("shape").get<Tensor::Shape>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(sidecar.string() + ": " + e.what());
  }
  if (shape.empty() || std::find(shape.begin(), shape.end(), 0) != shape.end())
    throw FormatError(sidecar.string() + ": shape must list positive extents");
  const std::size_t n = shape_size(shape);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open");
  std::vector<unsigned char> buf(n * 8);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size()) throw FormatError(path.string() + ": truncated raw data");
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = bits << 8 | buf[i * 8 + static_cast<std::size_t>(b)];
    data[i] = std::bit_cast<double>(bits);
  }
  return Tensor(shape, std::move(data));
}

void write_raw(const fs::path& path, const Tensor& t) {
  make_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path.string() + ": cannot write");
  for (double v : t.data()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      out.put(static_cast<char>(bits & 0xff));
      bits >>= 8;
    }
  }
  fs::path sidecar = path;
  sidecar.replace_extension(".json");
  std::ofstream meta(sidecar);
  meta << nlohmann::json{{"shape", t.shape()}, {"dtype", "f64le"}}.dump() << "\n";
  if (!out || !meta) throw FormatError(path.string() + ": write failed");
}

bool is_image_file(const fs::path& path) {
  const std::string e = lower_ext(path);
  return e == ".pgm" || e == ".png" || e == ".raw" || e == ".f64";
}

Tensor read_image(const fs::path& path) {
  const std::string e = lower_ext(path);
  if (e == ".pgm") return read_pgm(path);
  if (e == ".png") return read_png(path);
  if (e == ".raw" || e == ".f64") return read_raw(path);
  throw FormatError(path.string() + ": unsupported image extension");
}

void write_pgm(const fs::path& path, const Tensor& image, double lo, double hi) {
  std::size_t h, w, c;
  const double* px = plane_of(image, h, w, c);
  if (c != 1) throw ShapeError("write_pgm: expected a single channel");
  make_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path.string() + ": cannot write");
  out << "P5\n" << w << " " << h << "\n255\n";
  for (std::size_t i = 0; i < h * w; ++i) out.put(static_cast<char>(to_byte(px[i], lo, hi)));
  if (!out) throw FormatError(path.string() + ": write failed");
}

void write_png(const fs::path& path, const Tensor& image, double lo, double hi) {
  std::size_t h, w, c;
  const double* px = plane_of(image, h, w, c);
  if (c != 1 && c != 3) throw ShapeError("write_png: expected 1 or 3 channels");
  std::vector<unsigned char> buf(h * w * c);
  const std::size_t hw = h * w;
  for (std::size_t i = 0; i < hw; ++i)
    for (std::size_t k = 0; k < c; ++k) buf[i * c + k] = to_byte(px[k * hw + i], lo, hi);
  make_parent(path);
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(w);
  png.height = static_cast<png_uint_32>(h);
  png.format = c == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, buf.data(), 0, nullptr))
    throw FormatError(path.string() + ": " + png.message);
}

}  // namespace rei
