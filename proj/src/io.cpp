#include "wavefield/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace wavefield::io {
namespace {

constexpr std::string_view kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

void put_double(std::vector<std::uint8_t>& out, double v) {
  static_assert(std::endian::native == std::endian::little, "packed matrices assume a little-endian host");
  std::array<std::uint8_t, sizeof(double)> raw{};
  std::memcpy(raw.data(), &v, sizeof(double));
  out.insert(out.end(), raw.begin(), raw.end());
}

void write_string(std::ostream& out, const std::string& s) {
  out << nlohmann::json(s).dump();
}

void write_value(std::ostream& out, const nlohmann::json& doc, int indent, int depth) {
  const auto newline = [&](int d) {
    if (indent < 0) return;
    out << '\n' << std::string(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (doc.type()) {
    case nlohmann::json::value_t::object: {
      if (doc.empty()) {
        out << "{}";
        return;
      }
      out << '{';
      bool first = true;
      for (const auto& [key, value] : doc.items()) {  // nlohmann objects are std::map: sorted keys
        if (!first) out << ',';
        first = false;
        newline(depth + 1);
        write_string(out, key);
        out << (indent < 0 ? ":" : ": ");
        write_value(out, value, indent, depth + 1);
      }
      newline(depth);
      out << '}';
      return;
    }
    case nlohmann::json::value_t::array: {
      if (doc.empty()) {
        out << "[]";
        return;
      }
      out << '[';
      bool first = true;
      for (const auto& value : doc) {
        if (!first) out << ',';
        first = false;
        newline(depth + 1);
        write_value(out, value, indent, depth + 1);
      }
      newline(depth);
      out << ']';
      return;
    }
    case nlohmann::json::value_t::number_float: {
      const double v = doc.get<double>();
      if (std::isfinite(v)) {
        out << format_double(v);
      } else {
        out << "null";
      }
      return;
    }
    default:
      out << doc.dump();
  }
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t triple = (std::uint32_t{bytes[i]} << 16) | (std::uint32_t{bytes[i + 1]} << 8) | bytes[i + 2];
    out += kAlphabet[(triple >> 18) & 63];
    out += kAlphabet[(triple >> 12) & 63];
    out += kAlphabet[(triple >> 6) & 63];
    out += kAlphabet[triple & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t triple = std::uint32_t{bytes[i]} << 16;
    out += kAlphabet[(triple >> 18) & 63];
    out += kAlphabet[(triple >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t triple = (std::uint32_t{bytes[i]} << 16) | (std::uint32_t{bytes[i + 1]} << 8);
    out += kAlphabet[(triple >> 18) & 63];
    out += kAlphabet[(triple >> 12) & 63];
    out += kAlphabet[(triple >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw std::invalid_argument("base64: length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t triple = 0;
    int pad = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      const char c = text[i + j];
      int v = 0;
      if (c == '=') {
        if (i + 4 != text.size() || j < 2) throw std::invalid_argument("base64: misplaced padding");
        ++pad;
      } else {
        if (pad > 0) throw std::invalid_argument("base64: data after padding");
        v = decode_char(c);
        if (v < 0) throw std::invalid_argument("base64: invalid character");
      }
      triple = (triple << 6) | static_cast<std::uint32_t>(v);
    }
    out.push_back(static_cast<std::uint8_t>((triple >> 16) & 0xFF));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((triple >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(triple & 0xFF));
  }
  return out;
}

std::string pack_matrix(const CMatrix& m) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(static_cast<std::size_t>(m.size()) * 2 * sizeof(double));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      put_double(bytes, m(r, c).real());
      put_double(bytes, m(r, c).imag());
    }
  }
  return base64_encode(bytes);
}

CMatrix unpack_matrix(std::string_view text, Eigen::Index rows, Eigen::Index cols) {
  const auto bytes = base64_decode(text);
  if (bytes.size() != static_cast<std::size_t>(rows * cols) * 2 * sizeof(double)) {
    throw std::invalid_argument("unpack_matrix: byte count does not match shape");
  }
  CMatrix m(rows, cols);
  std::size_t offset = 0;
  const auto next = [&] {
    double v = 0.0;
    std::memcpy(&v, bytes.data() + offset, sizeof(double));
    offset += sizeof(double);
    return v;
  };
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double re = next();
      const double im = next();
      m(r, c) = cplx(re, im);
    }
  }
  return m;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", value);
  return buf.data();
}

void write_json(std::ostream& out, const nlohmann::json& doc, int indent) {
  write_value(out, doc, indent, 0);
  if (indent >= 0) out << '\n';
}

std::string dump_json(const nlohmann::json& doc, int indent) {
  std::ostringstream out;
  write_json(out, doc, indent);
  return out.str();
}

}  // namespace wavefield::io
