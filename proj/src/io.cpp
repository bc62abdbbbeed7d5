#include "qgraph/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace qgraph {

std::string hex_encode(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

double hex_decode(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw std::invalid_argument("hex_decode: unparsable float: " + s);
  return v;
}

std::string format_g17(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::uint64_t fnv1a64(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& p) {
  const std::string content = read_text_file(p);
  return fnv1a64(content.data(), content.size());
}

std::string to_hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + p.string());
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw std::runtime_error("write failed: " + p.string());
}

std::string read_text_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for read: " + p.string());
  std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return s;
}

void write_csv(const std::filesystem::path& p,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ',';
    out += header[i];
  }
  out += '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw std::invalid_argument("write_csv: row width mismatch");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_g17(row[i]);
    }
    out += '\n';
  }
  write_text_file(p, out);
}

void dump_matrix_binary(const std::filesystem::path& base_path, const MatC& m) {
  std::string raw;
  raw.reserve(static_cast<std::size_t>(m.size()) * 16);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double re = m(r, c).real(), im = m(r, c).imag();
      raw.append(reinterpret_cast<const char*>(&re), sizeof re);
      raw.append(reinterpret_cast<const char*>(&im), sizeof im);
    }
  }
  std::filesystem::path bin = base_path;
  bin += ".bin";
  write_text_file(bin, raw);
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["layout"] = "row-major";
  j["format"] = "interleaved-re-im-binary64";
  j["endianness"] = "native";
  j["bin_fnv1a64"] = to_hex64(fnv1a64(raw.data(), raw.size()));
  std::filesystem::path hdr = base_path;
  hdr += ".json";
  write_text_file(hdr, j.dump(2) + "\n");
}

nlohmann::json cplx_to_json(const cplx& z) {
  nlohmann::json j;
  j["re"] = z.real();
  j["im"] = z.imag();
  j["re_hex"] = hex_encode(z.real());
  j["im_hex"] = hex_encode(z.imag());
  return j;
}

cplx cplx_from_json(const nlohmann::json& j) {
  if (j.contains("re_hex"))
    return {hex_decode(j.at("re_hex").get<std::string>()),
            hex_decode(j.at("im_hex").get<std::string>())};
  return {j.at("re").get<double>(), j.at("im").get<double>()};
}

}  // namespace qgraph
