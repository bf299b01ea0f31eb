#include "aquathru/raster_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "aquathru/error.hpp"

namespace aquathru {

namespace {

constexpr std::int64_t kMaxDim = 1 << 20;        // per-axis pixel limit
constexpr std::int64_t kMaxPixels = 1 << 26;     // total pixel limit

[[noreturn]] void fail(const char* fmt_what, std::size_t offset, const std::string& detail) {
  throw ValidationError(std::string(fmt_what) + ": " + detail + " at byte " +
                        std::to_string(offset));
}

// Cursor over the input with bounds-checked reads.
struct ByteReader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
  const char* format;

  bool eof() const { return pos >= bytes.size(); }
  std::uint8_t peek() const {
    if (eof()) fail(format, pos, "unexpected end of data");
    return bytes[pos];
  }
  std::uint8_t take() {
    const std::uint8_t b = peek();
    ++pos;
    return b;
  }
  std::size_t remaining() const { return bytes.size() - pos; }
};

bool is_space(std::uint8_t b) { return b == ' ' || b == '\t' || b == '\n' || b == '\r' || b == '\f' || b == '\v'; }

// Netpbm-style whitespace, with `#` comments running to end of line.
void skip_space_and_comments(ByteReader& r, bool allow_comments) {
  while (!r.eof()) {
    const std::uint8_t b = r.peek();
    if (is_space(b)) {
      r.take();
    } else if (b == '#' && allow_comments) {
      while (!r.eof() && r.take() != '\n') {
      }
    } else {
      return;
    }
  }
}

std::int64_t read_uint_token(ByteReader& r, const char* what) {
  const std::size_t start = r.pos;
  if (r.eof() || r.peek() < '0' || r.peek() > '9') {
    fail(r.format, start, std::string("expected ") + what);
  }
  std::int64_t value = 0;
  while (!r.eof() && r.peek() >= '0' && r.peek() <= '9') {
    value = value * 10 + (r.take() - '0');
    if (value > std::numeric_limits<std::int64_t>::max() / 16) {
      fail(r.format, start, std::string(what) + " out of range");
    }
  }
  return value;
}

std::string read_token(ByteReader& r, const char* what) {
  const std::size_t start = r.pos;
  std::string token;
  while (!r.eof() && !is_space(r.peek())) token.push_back(static_cast<char>(r.take()));
  if (token.empty()) fail(r.format, start, std::string("expected ") + what);
  return token;
}

void check_dims(ByteReader& r, std::int64_t w, std::int64_t h, std::size_t offset) {
  if (w <= 0 || h <= 0 || w > kMaxDim || h > kMaxDim || w * h > kMaxPixels) {
    fail(r.format, offset, "unreasonable dimensions " + std::to_string(w) + "x" + std::to_string(h));
  }
}

float float_from_bits(std::uint32_t u) { return std::bit_cast<float>(u); }
std::uint32_t bits_from_float(float f) { return std::bit_cast<std::uint32_t>(f); }

// Shared PFM payload parse; returns top-to-bottom float samples.
std::vector<float> parse_pfm(std::span<const std::uint8_t> bytes, int& out_w, int& out_h) {
  ByteReader r{bytes, 0, "pfm"};
  if (r.remaining() < 2 || r.bytes[0] != 'P') fail("pfm", 0, "invalid magic");
  if (r.bytes[1] == 'F') fail("pfm", 0, "color PFM 'PF' not accepted for single-channel raster");
  if (r.bytes[1] != 'f') fail("pfm", 0, "invalid magic");
  r.pos = 2;

  skip_space_and_comments(r, false);
  const std::size_t dim_off = r.pos;
  const std::int64_t w = read_uint_token(r, "width");
  skip_space_and_comments(r, false);
  const std::int64_t h = read_uint_token(r, "height");
  check_dims(r, w, h, dim_off);

  skip_space_and_comments(r, false);
  const std::size_t scale_off = r.pos;
  const std::string scale_token = read_token(r, "scale");
  double scale = 0.0;
  try {
    std::size_t used = 0;
    scale = std::stod(scale_token, &used);
    if (used != scale_token.size()) throw std::invalid_argument(scale_token);
  } catch (const std::exception&) {
    fail("pfm", scale_off, "invalid scale '" + scale_token + "'");
  }
  if (!std::isfinite(scale) || scale == 0.0) fail("pfm", scale_off, "non-finite or zero scale");
  const bool little_endian = scale < 0.0;

  if (r.eof() || !is_space(r.peek())) fail("pfm", r.pos, "expected whitespace before payload");
  r.take();

  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 4;
  if (r.remaining() < need) {
    fail("pfm", bytes.size(), "truncated payload, need " + std::to_string(need) +
                                  " bytes, have " + std::to_string(r.remaining()));
  }
  if (r.remaining() > need) {
    fail("pfm", r.pos + need, "trailing bytes after payload");
  }

  std::vector<float> samples(static_cast<std::size_t>(w) * h);
  const std::uint8_t* p = bytes.data() + r.pos;
  // File rows run bottom-to-top.
  for (std::int64_t row = 0; row < h; ++row) {
    const std::int64_t out_row = h - 1 - row;
    for (std::int64_t col = 0; col < w; ++col) {
      std::uint32_t u;
      if (little_endian) {
        u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
            (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
      } else {
        u = static_cast<std::uint32_t>(p[3]) | (static_cast<std::uint32_t>(p[2]) << 8) |
            (static_cast<std::uint32_t>(p[1]) << 16) | (static_cast<std::uint32_t>(p[0]) << 24);
      }
      samples[static_cast<std::size_t>(out_row) * w + col] = float_from_bits(u);
      p += 4;
    }
  }
  out_w = static_cast<int>(w);
  out_h = static_cast<int>(h);
  return samples;
}

std::vector<std::uint8_t> encode_pfm(const std::vector<float>& top_down, int w, int h) {
  std::string header = "Pf\n" + std::to_string(w) + " " + std::to_string(h) + "\n-1.0\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + static_cast<std::size_t>(w) * h * 4);
  for (int row = h - 1; row >= 0; --row) {
    for (int col = 0; col < w; ++col) {
      const std::uint32_t u = bits_from_float(top_down[static_cast<std::size_t>(row) * w + col]);
      out.push_back(static_cast<std::uint8_t>(u & 0xff));
      out.push_back(static_cast<std::uint8_t>((u >> 8) & 0xff));
      out.push_back(static_cast<std::uint8_t>((u >> 16) & 0xff));
      out.push_back(static_cast<std::uint8_t>((u >> 24) & 0xff));
    }
  }
  return out;
}

}  // namespace

RgbImage read_ppm(std::span<const std::uint8_t> bytes) {
  ByteReader r{bytes, 0, "ppm"};
  if (r.remaining() < 2 || r.bytes[0] != 'P' || r.bytes[1] != '6') {
    fail("ppm", 0, "invalid magic, expected 'P6'");
  }
  r.pos = 2;

  skip_space_and_comments(r, true);
  const std::size_t dim_off = r.pos;
  const std::int64_t w = read_uint_token(r, "width");
  skip_space_and_comments(r, true);
  const std::int64_t h = read_uint_token(r, "height");
  check_dims(r, w, h, dim_off);

  skip_space_and_comments(r, true);
  const std::size_t maxval_off = r.pos;
  const std::int64_t maxval = read_uint_token(r, "maxval");
  if (maxval != 255 && maxval != 65535) {
    fail("ppm", maxval_off, "maxval " + std::to_string(maxval) + " not in {255, 65535}");
  }

  if (r.eof() || !is_space(r.peek())) fail("ppm", r.pos, "expected single whitespace before payload");
  r.take();

  const int bytes_per_sample = maxval == 255 ? 1 : 2;
  const std::size_t need = static_cast<std::size_t>(w) * h * 3 * bytes_per_sample;
  if (r.remaining() < need) {
    fail("ppm", bytes.size(), "truncated payload, need " + std::to_string(need) +
                                  " bytes, have " + std::to_string(r.remaining()));
  }
  if (r.remaining() > need) {
    fail("ppm", r.pos + need, "trailing bytes after payload");
  }

  RgbImage img(static_cast<int>(w), static_cast<int>(h));
  const std::uint8_t* p = bytes.data() + r.pos;
  const float inv = 1.0f / static_cast<float>(maxval);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    std::uint32_t v;
    if (bytes_per_sample == 1) {
      v = *p++;
    } else {
      v = (static_cast<std::uint32_t>(p[0]) << 8) | p[1];  // big-endian
      p += 2;
    }
    img.data[i] = static_cast<float>(v) * inv;
  }
  return img;
}

std::vector<std::uint8_t> write_ppm(const RgbImage& img, int maxval) {
  img.validate("ppm write");
  if (maxval != 255 && maxval != 65535) {
    throw ValidationError("ppm write: maxval must be 255 or 65535");
  }
  std::string header =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n" +
      std::to_string(maxval) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const int bytes_per_sample = maxval == 255 ? 1 : 2;
  out.reserve(out.size() + img.data.size() * bytes_per_sample);
  for (const float v : img.data) {
    const auto q = static_cast<std::uint32_t>(
        std::lround(static_cast<double>(v) * maxval));
    if (bytes_per_sample == 1) {
      out.push_back(static_cast<std::uint8_t>(q));
    } else {
      out.push_back(static_cast<std::uint8_t>(q >> 8));
      out.push_back(static_cast<std::uint8_t>(q & 0xff));
    }
  }
  return out;
}

RangeMap read_pfm_range(std::span<const std::uint8_t> bytes) {
  int w = 0, h = 0;
  const std::vector<float> samples = parse_pfm(bytes, w, h);
  RangeMap map(w, h);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const float v = samples[i];
    if (std::isnan(v)) {
      map.valid[i] = 0;
      map.data[i] = 0.0f;
    } else if (!std::isfinite(v) || v < 0.0f) {
      throw ValidationError("pfm: range sample " + std::to_string(i) +
                            " is negative or infinite");
    } else {
      map.data[i] = v;
    }
  }
  return map;
}

ConfidenceMap read_pfm_confidence(std::span<const std::uint8_t> bytes) {
  int w = 0, h = 0;
  const std::vector<float> samples = parse_pfm(bytes, w, h);
  ConfidenceMap map(w, h);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const float v = samples[i];
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw ValidationError("pfm: confidence sample " + std::to_string(i) +
                            " outside [0,1]");
    }
    map.data[i] = v;
  }
  return map;
}

DepthMask read_pfm_mask(std::span<const std::uint8_t> bytes) {
  int w = 0, h = 0;
  const std::vector<float> samples = parse_pfm(bytes, w, h);
  DepthMask mask(w, h);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const float v = samples[i];
    if (v != 0.0f && v != 1.0f) {
      throw ValidationError("pfm: mask sample " + std::to_string(i) + " is not 0 or 1");
    }
    mask.data[i] = v == 1.0f ? 1 : 0;
  }
  return mask;
}

std::vector<std::uint8_t> write_pfm(const RangeMap& map) {
  map.validate("pfm write");
  std::vector<float> samples(map.data.begin(), map.data.end());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!map.valid[i]) samples[i] = std::numeric_limits<float>::quiet_NaN();
  }
  return encode_pfm(samples, map.width, map.height);
}

std::vector<std::uint8_t> write_pfm(const ConfidenceMap& map) {
  map.validate("pfm write");
  return encode_pfm(map.data, map.width, map.height);
}

std::vector<std::uint8_t> write_pfm(const DepthMask& mask) {
  if (mask.empty() || mask.data.size() != mask.pixel_count()) {
    throw ValidationError("pfm write: empty or inconsistent mask");
  }
  std::vector<float> samples(mask.data.size());
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = mask.data[i] ? 1.0f : 0.0f;
  return encode_pfm(samples, mask.width, mask.height);
}

std::vector<std::uint8_t> write_pgm(std::span<const std::uint8_t> gray, int width, int height) {
  if (width <= 0 || height <= 0 ||
      gray.size() != static_cast<std::size_t>(width) * height) {
    throw ValidationError("pgm write: data size does not match dimensions");
  }
  std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), gray.begin(), gray.end());
  return out;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ValidationError("cannot write '" + path + "'");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ValidationError("write failed for '" + path + "'");
}

RgbImage load_ppm(const std::string& path) { return read_ppm(read_file(path)); }

void save_ppm(const RgbImage& img, const std::string& path, int maxval) {
  write_file(path, write_ppm(img, maxval));
}

RangeMap load_pfm_range(const std::string& path) { return read_pfm_range(read_file(path)); }

ConfidenceMap load_pfm_confidence(const std::string& path) {
  return read_pfm_confidence(read_file(path));
}

DepthMask load_pfm_mask(const std::string& path) { return read_pfm_mask(read_file(path)); }

void save_pfm(const RangeMap& map, const std::string& path) { write_file(path, write_pfm(map)); }

void save_pfm(const ConfidenceMap& map, const std::string& path) {
  write_file(path, write_pfm(map));
}

void save_pfm(const DepthMask& mask, const std::string& path) {
  write_file(path, write_pfm(mask));
}

}  // namespace aquathru
