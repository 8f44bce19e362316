#include "lflow/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cfenv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lflow {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(const std::string& bytes, std::size_t& pos) {
  for (;;) {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (start == pos) throw Error(ErrorCode::Io, "pgm: truncated header");
  return bytes.substr(start, pos - start);
}

unsigned long header_number(const std::string& bytes, std::size_t& pos, const char* what) {
  const std::string tok = header_token(bytes, pos);
  if (!std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    throw Error(ErrorCode::Io, std::string("pgm: malformed ") + what);
  return std::stoul(tok);
}

}  // namespace

RealField decode_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  const std::string magic = header_token(bytes, pos);
  if (magic != "P5") throw Error(ErrorCode::Io, "unsupported image format '" + magic + "' (expected P5)");
  const unsigned long width = header_number(bytes, pos, "width");
  const unsigned long height = header_number(bytes, pos, "height");
  const unsigned long maxval = header_number(bytes, pos, "maxval");
  if (width == 0 || height == 0) throw Error(ErrorCode::Io, "pgm: empty image");
  if (maxval == 0 || maxval > 65535) throw Error(ErrorCode::Io, "pgm: maxval out of range");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw Error(ErrorCode::Io, "pgm: missing separator after header");
  ++pos;

  const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
  const std::size_t n = width * height;
  if (bytes.size() - pos < n * bytes_per_sample) throw Error(ErrorCode::Io, "pgm: truncated pixel data");

  RealField out(Shape{height, width});
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = bytes_per_sample == 2 ? (unsigned{p[2 * i]} << 8) | p[2 * i + 1] : p[i];
    if (v > maxval) throw Error(ErrorCode::Io, "pgm: sample exceeds maxval");
    out[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return out;
}

RealField read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_pgm(buf.str());
}

std::string encode_pgm(const RealField& field, unsigned maxval) {
  if (maxval == 0 || maxval > 65535) throw Error(ErrorCode::InvalidArgument, "pgm: maxval out of range");
  if (field.size() == 0) throw Error(ErrorCode::InvalidArgument, "pgm: empty image");
  std::string out = "P5\n" + std::to_string(field.width()) + " " + std::to_string(field.height()) + "\n" +
                    std::to_string(maxval) + "\n";
  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double v = std::isfinite(field[i]) ? std::clamp(field[i], 0.0, 1.0) : 0.0;
    const auto q = static_cast<unsigned>(std::nearbyint(v * maxval));
    if (maxval > 255) out.push_back(static_cast<char>(q >> 8));
    out.push_back(static_cast<char>(q & 0xff));
  }
  std::fesetround(saved);
  return out;
}

void write_image(const std::filesystem::path& path, const RealField& field, unsigned maxval) {
  const std::string bytes = encode_pgm(field, maxval);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace lflow
