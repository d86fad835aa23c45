#pragma once

// Serialization helpers shared by the output writers: base64 for packed
// complex matrices, 17-significant-digit float formatting, and a JSON
// printer that applies that formatting to every floating-point value.

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "wavefield/hilbert.hpp"

namespace wavefield::io {

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Row-major (re, im) pairs as little-endian IEEE-754 doubles, base64 encoded.
std::string pack_matrix(const CMatrix& m);
CMatrix unpack_matrix(std::string_view text, Eigen::Index rows, Eigen::Index cols);

/// "%.17g"; non-finite values print as nan / inf / -inf.
std::string format_double(double value);

/// Deterministic JSON text (object keys sorted, floats with 17 significant digits).
void write_json(std::ostream& out, const nlohmann::json& doc, int indent = 2);
std::string dump_json(const nlohmann::json& doc, int indent = 2);

}  // namespace wavefield::io
