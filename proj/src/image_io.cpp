#include "satlab/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "satlab/data.hpp"
#include "satlab/errors.hpp"

namespace satlab {

namespace {

/// Next header token, skipping whitespace and '#' comments.
std::string token(std::istream& in) {
  std::string t;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
    } else if (!std::isspace(ch)) {
      t.push_back(char(ch));
      break;
    }
  }
  while ((ch = in.peek()) != EOF && !std::isspace(ch) && ch != '#') t.push_back(char(in.get()));
  return t;
}

long header_number(std::istream& in, const std::filesystem::path& path) {
  const std::string t = token(in);
  if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    throw FormatError(path.string() + ": malformed image header");
  }
  return std::stol(t);
}

}  // namespace

Tensor<double> read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image: " + path.string());
  const std::string magic = token(in);
  std::size_t channels;
  if (magic == "P6") {
    channels = 3;
  } else if (magic == "P5") {
    channels = 1;
  } else {
    throw FormatError(path.string() + ": not a binary PPM/PGM image");
  }
  const long w = header_number(in, path), h = header_number(in, path), maxval = header_number(in, path);
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255) throw FormatError(path.string() + ": unsupported image header");
  in.get();  // single whitespace before the raster
  const std::size_t hw = std::size_t(h) * std::size_t(w);
  std::vector<unsigned char> raster(hw * channels);
  in.read(reinterpret_cast<char*>(raster.data()), std::streamsize(raster.size()));
  if (in.gcount() != std::streamsize(raster.size())) throw FormatError(path.string() + ": truncated raster");
  Tensor<double> out(Shape{1, channels, std::size_t(h), std::size_t(w)});
  for (std::size_t p = 0; p < hw; ++p) {
    for (std::size_t c = 0; c < channels; ++c) {
      out[c * hw + p] = normalize_pixel(double(raster[p * channels + c]) * 255.0 / double(maxval));
    }
  }
  return out;
}

void write_image(const Tensor<double>& image, const std::filesystem::path& path) {
  const Shape s = image.shape();
  if (s.n < 1 || (s.c != 1 && s.c != 3)) throw ShapeError("write_image needs a 1- or 3-channel image");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write image: " + path.string());
  out << (s.c == 3 ? "P6" : "P5") << "\n" << s.w << " " << s.h << "\n255\n";
  const std::size_t hw = s.spatial();
  std::vector<char> raster(hw * s.c);
  for (std::size_t p = 0; p < hw; ++p) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double raw = denormalize_pixel(std::clamp(image[c * hw + p], -1.0, 1.0));
      raster[p * s.c + c] = char(static_cast<unsigned char>(std::lround(raw)));
    }
  }
  out.write(raster.data(), std::streamsize(raster.size()));
  if (!out) throw Error("failed writing image: " + path.string());
}

}  // namespace satlab
