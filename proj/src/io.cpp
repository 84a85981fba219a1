#include "atten/io.hpp"

#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

namespace atten {

namespace {

void put_u64_le(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64_le(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw Error("FTEN: truncated header");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

// All supported targets are little-endian IEEE; memcpy through a fixed-width
// integer keeps the byte order explicit anyway.
void put_f64_le(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64_le(os, bits);
}

void put_f32_le(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 4);
}

}  // namespace

void write_ften(std::ostream& os, const Tensor& t, FtenDtype dtype) {
  os.write("FTEN", 4);
  const unsigned char version = 1;
  const unsigned char dt = static_cast<unsigned char>(dtype);
  const unsigned char rank = static_cast<unsigned char>(t.rank());
  os.put(static_cast<char>(version));
  os.put(static_cast<char>(dt));
  os.put(static_cast<char>(rank));
  for (const std::size_t d : t.dims()) put_u64_le(os, d);
  if (dtype == FtenDtype::F64) {
    for (const double v : t.vec()) put_f64_le(os, v);
  } else {
    for (const double v : t.vec()) put_f32_le(os, static_cast<float>(v));
  }
  if (!os) throw Error("FTEN: write failed");
}

void write_ften(const std::string& path, const Tensor& t, FtenDtype dtype) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("FTEN: cannot open for writing: " + path);
  write_ften(os, t, dtype);
}

Tensor read_ften(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "FTEN", 4) != 0) throw Error("FTEN: bad magic");
  const int version = is.get();
  if (version != 1) throw Error("FTEN: unsupported version " + std::to_string(version));
  const int dt = is.get();
  if (dt != 1 && dt != 2) throw Error("FTEN: unknown dtype code " + std::to_string(dt));
  const int rank = is.get();
  if (rank < 0 || rank > 16 || !is) throw Error("FTEN: bad rank");
  Dims dims(static_cast<std::size_t>(rank));
  std::size_t total = 1;
  for (auto& d : dims) {
    const std::uint64_t v = get_u64_le(is);
    if (v == 0 || v > (1ull << 32)) throw Error("FTEN: bad dim");
    d = static_cast<std::size_t>(v);
    if (total > (1ull << 40) / d) throw Error("FTEN: tensor too large");
    total *= d;
  }
  std::vector<double> data(total);
  if (dt == 2) {
    for (auto& v : data) {
      const std::uint64_t bits = get_u64_le(is);
      std::memcpy(&v, &bits, 8);
    }
  } else {
    for (auto& v : data) {
      unsigned char buf[4];
      is.read(reinterpret_cast<char*>(buf), 4);
      if (!is) throw Error("FTEN: truncated payload");
      std::uint32_t bits = 0;
      for (int i = 3; i >= 0; --i) bits = (bits << 8) | buf[i];
      float f;
      std::memcpy(&f, &bits, 4);
      v = static_cast<double>(f);
    }
  }
  if (!is) throw Error("FTEN: truncated payload");
  return Tensor(std::move(dims), std::move(data));
}

Tensor read_ften(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("FTEN: cannot open " + path);
  return read_ften(is);
}

namespace {

// PGM header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream& is) {
  std::string tok;
  int c = is.get();
  while (is) {
    if (c == '#') {
      while (is && c != '\n') c = is.get();
    } else if (std::isspace(c)) {
      // skip
    } else {
      break;
    }
    c = is.get();
  }
  while (is && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = is.get();
  }
  if (tok.empty()) throw Error("PGM: truncated header");
  return tok;
}

std::size_t pgm_number(std::istream& is, const char* what) {
  const std::string tok = pgm_token(is);
  std::size_t v = 0;
  for (const char c : tok) {
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      throw Error(std::string("PGM: bad ") + what + " '" + tok + "'");
    }
    v = v * 10 + static_cast<std::size_t>(c - '0');
  }
  return v;
}

}  // namespace

Tensor parse_pgm_mask(std::istream& is) {
  const std::string magic = pgm_token(is);
  if (magic != "P5") throw Error("PGM: expected binary P5, got '" + magic + "'");
  const std::size_t w = pgm_number(is, "width");
  const std::size_t h = pgm_number(is, "height");
  const std::size_t maxval = pgm_number(is, "maxval");
  if (w == 0 || h == 0) throw Error("PGM: zero dimension");
  if (maxval == 0 || maxval > 255) {
    throw Error("PGM: only 8-bit maxval supported, got " + std::to_string(maxval));
  }
  // the single whitespace byte after maxval was consumed by pgm_number
  std::vector<unsigned char> raw(w * h);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(is.gcount()) != raw.size()) {
    throw Error("PGM: truncated pixel data");
  }
  std::vector<double> data(w * h);
  for (std::size_t i = 0; i < raw.size(); ++i) data[i] = raw[i] >= 128 ? 1.0 : 0.0;
  return Tensor(Dims{1, h, w}, std::move(data));
}

Tensor load_pgm_mask(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("PGM: cannot open " + path);
  return parse_pgm_mask(is);
}

void atomic_write_text(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path dir = target.parent_path().empty() ? fs::path(".") : target.parent_path();
  const fs::path tmp = dir / (target.filename().string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + tmp.string());
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os) throw Error("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw Error("rename failed: " + tmp.string() + " -> " + path + ": " + ec.message());
}

}  // namespace atten
