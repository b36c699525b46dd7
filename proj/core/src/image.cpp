#include "unest/image.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace unest {
namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& is, const std::string& path) {
  std::string tok;
  int c = is.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = is.get();
    } else if (std::isspace(c)) {
      c = is.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = is.get();
  }
  if (tok.empty()) {
    throw std::runtime_error("malformed PGM header in " + path);
  }
  return tok;
}

int parse_int(const std::string& tok, const std::string& path) {
  for (const char c : tok) {
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      throw std::runtime_error("malformed PGM header in " + path +
                               ": expected integer, got '" + tok + "'");
    }
  }
  return std::stoi(tok);
}

}  // namespace

ImageGrid load_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char magic[2];
  is.read(magic, 2);
  if (is.gcount() != 2 || magic[0] != 'P' || magic[1] != '5') {
    std::string got = is.gcount() == 2 ? std::string(magic, 2) : std::string("<eof>");
    throw std::runtime_error("unsupported magic '" + got + "' in " + path +
                             " (only binary P5 is supported)");
  }
  const int width = parse_int(next_token(is, path), path);
  const int height = parse_int(next_token(is, path), path);
  const int maxval = parse_int(next_token(is, path), path);
  if (width < 1 || height < 1 || maxval < 1 || maxval > 65535) {
    throw std::runtime_error("malformed PGM dimensions in " + path);
  }
  // Exactly one whitespace byte separates the header from the payload; the
  // token reader has already consumed it.
  ImageGrid img(height, width);
  const std::size_t n = img.size();
  if (maxval <= 255) {
    std::vector<unsigned char> raw(n);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) {
      throw std::runtime_error("truncated PGM payload in " + path);
    }
    for (std::size_t i = 0; i < n; ++i) {
      img.pixels[i] = static_cast<double>(raw[i]) / maxval;
    }
  } else {
    std::vector<unsigned char> raw(n * 2);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * 2));
    if (static_cast<std::size_t>(is.gcount()) != n * 2) {
      throw std::runtime_error("truncated PGM payload in " + path);
    }
    for (std::size_t i = 0; i < n; ++i) {
      // 16-bit samples are big-endian per the format.
      const int v = (static_cast<int>(raw[2 * i]) << 8) | raw[2 * i + 1];
      img.pixels[i] = static_cast<double>(v) / maxval;
    }
  }
  return img;
}

void save_pgm(const ImageGrid& img, const std::string& path) {
  for (const double v : img.pixels) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("save_pgm: intensity " + std::to_string(v) +
                                  " outside [0,1]");
    }
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    raw[i] = static_cast<unsigned char>(std::lround(img.pixels[i] * 255.0));
  }
  os.write(reinterpret_cast<const char*>(raw.data()),
           static_cast<std::streamsize>(raw.size()));
  if (!os) throw std::runtime_error("write failure on " + path);
}

Tensor normalize_for_model(const ImageGrid& img) {
  std::vector<double> data(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    data[i] = 2.0 * img.pixels[i] - 1.0;
  }
  return Tensor::from_data({1, img.height, img.width}, std::move(data));
}

ImageGrid denormalize(const Tensor& t) {
  if (t.rank() != 3 || t.dim(0) != 1) {
    throw std::invalid_argument("denormalize expects a [1,H,W] tensor, got " +
                                shape_to_string(t.shape()));
  }
  ImageGrid img(t.dim(1), t.dim(2));
  const std::vector<double>& data = t.data();
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = (data[i] + 1.0) * 0.5;
    img.pixels[i] = std::min(1.0, std::max(0.0, v));
  }
  return img;
}

}  // namespace unest
