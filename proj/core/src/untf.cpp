#include "unest/untf.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace unest {
namespace {

void put_u32_le(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {
      static_cast<unsigned char>(v & 0xff),
      static_cast<unsigned char>((v >> 8) & 0xff),
      static_cast<unsigned char>((v >> 16) & 0xff),
      static_cast<unsigned char>((v >> 24) & 0xff),
  };
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32_le(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

[[noreturn]] void malformed(const std::string& path, const std::string& why) {
  throw std::runtime_error("malformed UNTF file " + path + ": " + why);
}

}  // namespace

void save_untf(const std::string& path, const Tensor& t, int version) {
  if (version != 1 && version != 2) {
    throw std::invalid_argument("UNTF version must be 1 or 2");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write("UNTF", 4);
  const unsigned char ver = static_cast<unsigned char>(version);
  const unsigned char rank = static_cast<unsigned char>(t.rank());
  os.write(reinterpret_cast<const char*>(&ver), 1);
  os.write(reinterpret_cast<const char*>(&rank), 1);
  for (int d = 0; d < t.rank(); ++d) {
    put_u32_le(os, static_cast<std::uint32_t>(t.dim(d)));
  }
  const std::vector<double>& data = t.data();
  if (version == 1) {
    std::vector<float> f(data.begin(), data.end());
    static_assert(sizeof(float) == 4);
    os.write(reinterpret_cast<const char*>(f.data()),
             static_cast<std::streamsize>(f.size() * 4));
  } else {
    static_assert(sizeof(double) == 8);
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * 8));
  }
  if (!os) throw std::runtime_error("write failure on " + path);
}

Tensor load_untf(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  unsigned char header[6];
  is.read(reinterpret_cast<char*>(header), 6);
  if (is.gcount() != 6) malformed(path, "truncated header");
  if (std::memcmp(header, "UNTF", 4) != 0) malformed(path, "bad magic");
  const int version = header[4];
  if (version != 1 && version != 2) {
    malformed(path, "unsupported version " + std::to_string(version));
  }
  const int rank = header[5];
  Shape shape(static_cast<std::size_t>(rank));
  std::size_t n = 1;
  for (int d = 0; d < rank; ++d) {
    unsigned char dim_bytes[4];
    is.read(reinterpret_cast<char*>(dim_bytes), 4);
    if (is.gcount() != 4) malformed(path, "truncated dims");
    const std::uint32_t e = get_u32_le(dim_bytes);
    shape[static_cast<std::size_t>(d)] = static_cast<int>(e);
    n *= e;
  }
  std::vector<double> data(n);
  if (version == 1) {
    std::vector<float> f(n);
    is.read(reinterpret_cast<char*>(f.data()),
            static_cast<std::streamsize>(n * 4));
    if (static_cast<std::size_t>(is.gcount()) != n * 4) {
      malformed(path, "truncated payload");
    }
    for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<double>(f[i]);
  } else {
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(n * 8));
    if (static_cast<std::size_t>(is.gcount()) != n * 8) {
      malformed(path, "truncated payload");
    }
  }
  return Tensor::from_data(shape, std::move(data));
}

}  // namespace unest
