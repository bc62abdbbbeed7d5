#pragma once

// Serialization helpers shared across modules: exact binary64 round-trip
// encoding, deterministic text/CSV emission, file checksums for manifests,
// and a flat binary matrix dump for cross-language checks.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qgraph/types.hpp"

#include <json.hpp>

namespace qgraph {

// Hex-float encoding ("%a") round-trips any finite binary64 exactly.
std::string hex_encode(double x);
double hex_decode(const std::string& s);

// Fixed-format decimal with enough digits to round-trip (17 significant).
std::string format_g17(double x);

// FNV-1a 64-bit over raw bytes; non-cryptographic, used for manifest
// checksums and replay comparison only.
std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t fnv1a64_file(const std::filesystem::path& p);
std::string to_hex64(std::uint64_t v);

// Write text deterministically (binary mode, '\n' endings).
void write_text_file(const std::filesystem::path& p, const std::string& content);
std::string read_text_file(const std::filesystem::path& p);

// CSV writer: header row then rows of g17-formatted cells.
void write_csv(const std::filesystem::path& p,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

// Flat binary dump of a complex matrix: row-major, interleaved re/im
// binary64, native endianness; a JSON sidecar records the layout.
void dump_matrix_binary(const std::filesystem::path& base_path, const MatC& m);

// Complex <-> JSON as {"re": ..., "im": ...} with hex-float fields.
nlohmann::json cplx_to_json(const cplx& z);
cplx cplx_from_json(const nlohmann::json& j);

}  // namespace qgraph
