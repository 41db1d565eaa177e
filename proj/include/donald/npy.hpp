#pragma once

// Minimal reader/writer for the NPY container (versions 1.0 and 2.0 read,
// 1.0 written). Only little-endian float32/float64 C-order arrays are
// accepted; everything is exposed as double.

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "donald/error.hpp"

namespace donald::npy {

enum class Dtype { Float32, Float64 };

struct Array {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  Dtype stored_as = Dtype::Float64;
};

namespace detail {

inline constexpr std::array<char, 6> kMagic = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

[[noreturn]] inline void malformed(const std::string& why) {
  throw Error(ErrorCode::MalformedFile, why);
}

inline void skip_ws(std::string_view s, std::size_t& pos) {
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
}

inline void expect(std::string_view s, std::size_t& pos, char c) {
  skip_ws(s, pos);
  if (pos >= s.size() || s[pos] != c) malformed(std::string("npy header: expected '") + c + "'");
  ++pos;
}

inline std::string parse_quoted(std::string_view s, std::size_t& pos) {
  skip_ws(s, pos);
  if (pos >= s.size() || (s[pos] != '\'' && s[pos] != '"')) malformed("npy header: expected string");
  const char quote = s[pos++];
  const auto end = s.find(quote, pos);
  if (end == std::string_view::npos) malformed("npy header: unterminated string");
  std::string out(s.substr(pos, end - pos));
  pos = end + 1;
  return out;
}

inline bool parse_bool(std::string_view s, std::size_t& pos) {
  skip_ws(s, pos);
  if (s.substr(pos, 4) == "True") {
    pos += 4;
    return true;
  }
  if (s.substr(pos, 5) == "False") {
    pos += 5;
    return false;
  }
  malformed("npy header: expected True/False");
}

inline std::vector<std::size_t> parse_shape(std::string_view s, std::size_t& pos) {
  expect(s, pos, '(');
  std::vector<std::size_t> shape;
  for (;;) {
    skip_ws(s, pos);
    if (pos < s.size() && s[pos] == ')') {
      ++pos;
      return shape;
    }
    if (pos >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos])))
      malformed("npy header: bad shape");
    std::size_t v = 0;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
      v = v * 10 + static_cast<std::size_t>(s[pos] - '0');
      ++pos;
    }
    shape.push_back(v);
    skip_ws(s, pos);
    if (pos < s.size() && s[pos] == ',') ++pos;
  }
}

struct Header {
  std::string descr;
  bool fortran_order = false;
  std::vector<std::size_t> shape;
};

inline Header parse_header(std::string_view s) {
  Header h;
  bool have_descr = false, have_order = false, have_shape = false;
  std::size_t pos = 0;
  expect(s, pos, '{');
  for (;;) {
    skip_ws(s, pos);
    if (pos < s.size() && s[pos] == '}') break;
    const std::string key = parse_quoted(s, pos);
    expect(s, pos, ':');
    if (key == "descr") {
      h.descr = parse_quoted(s, pos);
      have_descr = true;
    } else if (key == "fortran_order") {
      h.fortran_order = parse_bool(s, pos);
      have_order = true;
    } else if (key == "shape") {
      h.shape = parse_shape(s, pos);
      have_shape = true;
    } else {
      malformed("npy header: unknown key '" + key + "'");
    }
    skip_ws(s, pos);
    if (pos < s.size() && s[pos] == ',') ++pos;
  }
  if (!have_descr || !have_order || !have_shape) malformed("npy header: missing key");
  return h;
}

template <typename T>
T read_le(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  return v;
}

}  // namespace detail

inline Array parse(std::span<const unsigned char> bytes) {
  using namespace detail;
  if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0)
    malformed("missing NPY magic");
  const unsigned major = bytes[6];
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    header_len = read_le<std::uint16_t>(bytes.data() + 8);
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) malformed("truncated NPY preamble");
    header_len = read_le<std::uint32_t>(bytes.data() + 8);
    offset = 12;
  } else {
    malformed("unsupported NPY version " + std::to_string(major));
  }
  if (bytes.size() < offset + header_len) malformed("truncated NPY header");
  const std::string_view text(reinterpret_cast<const char*>(bytes.data() + offset), header_len);
  const Header h = parse_header(text);

  Array out;
  std::size_t width = 0;
  if (h.descr == "<f8" || (h.descr == "=f8" && std::endian::native == std::endian::little)) {
    out.stored_as = Dtype::Float64;
    width = 8;
  } else if (h.descr == "<f4" || (h.descr == "=f4" && std::endian::native == std::endian::little)) {
    out.stored_as = Dtype::Float32;
    width = 4;
  } else {
    malformed("unsupported dtype '" + h.descr + "' (need <f4 or <f8)");
  }
  if (h.fortran_order) malformed("Fortran-ordered arrays are not supported");

  std::size_t count = 1;
  for (auto d : h.shape) count *= d;
  out.shape = h.shape;

  const std::size_t payload = offset + header_len;
  if (bytes.size() - payload != count * width)
    malformed("payload size " + std::to_string(bytes.size() - payload) + " does not match shape (" +
              std::to_string(count * width) + " bytes expected)");
  out.data.resize(count);
  const unsigned char* p = bytes.data() + payload;
  for (std::size_t i = 0; i < count; ++i, p += width) {
    out.data[i] = width == 8 ? read_le<double>(p) : static_cast<double>(read_le<float>(p));
  }
  return out;
}

inline Array load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse(bytes);
}

inline std::string serialize(std::span<const std::size_t> shape, std::span<const double> data,
                             Dtype dtype = Dtype::Float64) {
  std::string dict = std::string("{'descr': '") + (dtype == Dtype::Float64 ? "<f8" : "<f4") +
                     "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    dict += std::to_string(shape[i]);
    if (shape.size() == 1 || i + 1 < shape.size()) dict += ",";
    if (i + 1 < shape.size()) dict += " ";
  }
  dict += "), }";
  // Preamble (10 bytes) + dict + padding + '\n' is a multiple of 64.
  const std::size_t unpadded = 10 + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict += '\n';

  std::string out(detail::kMagic.begin(), detail::kMagic.end());
  out += '\x01';
  out += '\x00';
  const auto len = static_cast<std::uint16_t>(dict.size());
  out += static_cast<char>(len & 0xff);
  out += static_cast<char>(len >> 8);
  out += dict;

  auto append = [&out](const auto v) {
    char buf[sizeof(v)];
    std::memcpy(buf, &v, sizeof(v));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(v));
    out.append(buf, sizeof(v));
  };
  for (double v : data) {
    if (dtype == Dtype::Float64)
      append(v);
    else
      append(static_cast<float>(v));
  }
  return out;
}

inline void save(const std::filesystem::path& path, std::span<const std::size_t> shape,
                 std::span<const double> data, Dtype dtype = Dtype::Float64) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::UnwritableOutput, "cannot write '" + path.string() + "'");
  const auto bytes = serialize(shape, data, dtype);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::UnwritableOutput, "write failed for '" + path.string() + "'");
}

}  // namespace donald::npy
