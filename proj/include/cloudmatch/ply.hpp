#pragma once

#include "cloudmatch/geometry.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cloudmatch::ply {

class PlyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline bool is_float_type(std::string_view t) {
  return t == "float" || t == "double" || t == "float32" || t == "float64";
}

inline bool is_scalar_type(std::string_view t) {
  static constexpr std::string_view kTypes[] = {
      "char",  "uchar", "short",  "ushort", "int",     "uint",    "float",
      "double", "int8", "uint8",  "int16",  "uint16",  "int32",   "uint32",
      "float32", "float64"};
  for (auto k : kTypes) {
    if (k == t) return true;
  }
  return false;
}

struct Property {
  std::string name;
  bool is_list = false;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

inline std::vector<std::string> split(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string tok; ss >> tok;) out.push_back(tok);
  return out;
}

inline double parse_double(const std::string& tok, const std::string& where) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw PlyError(where + ": invalid number '" + tok + "'");
  }
  return v;
}

}  // namespace detail

/// Parses an ASCII PLY 1.0 stream. Reads the `vertex` element's x, y, z and,
/// when all three are present, nx, ny, nz. Other properties and elements are
/// skipped. Normals are re-normalized; if any normal has zero length the cloud
/// is returned without normals.
inline PointCloud read_cloud(std::istream& in, const std::string& source_name = "<stream>") {
  using detail::split;
  std::size_t line_no = 0;
  std::string line;
  auto where = [&] { return source_name + ":" + std::to_string(line_no); };
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") throw PlyError(where() + ": missing 'ply' magic");
  std::vector<detail::Element> elements;
  bool have_format = false;
  for (;;) {
    if (!next_line()) throw PlyError(where() + ": unexpected end of header");
    const auto tok = split(line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() != 3) throw PlyError(where() + ": malformed format line");
      if (tok[1] != "ascii") throw PlyError(where() + ": unsupported format '" + tok[1] + "'");
      if (tok[2] != "1.0") throw PlyError(where() + ": unsupported version '" + tok[2] + "'");
      have_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw PlyError(where() + ": malformed element line");
      std::size_t count = 0;
      const auto [p, ec] =
          std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), count);
      if (ec != std::errc() || p != tok[2].data() + tok[2].size()) {
        throw PlyError(where() + ": invalid element count '" + tok[2] + "'");
      }
      elements.push_back({tok[1], count, {}});
    } else if (tok[0] == "property") {
      if (elements.empty()) throw PlyError(where() + ": property before element");
      detail::Property prop;
      if (tok.size() == 5 && tok[1] == "list") {
        if (!detail::is_scalar_type(tok[2]) || !detail::is_scalar_type(tok[3])) {
          throw PlyError(where() + ": unknown list property type");
        }
        prop = {tok[4], true};
      } else if (tok.size() == 3) {
        if (!detail::is_scalar_type(tok[1])) {
          throw PlyError(where() + ": unknown property type '" + tok[1] + "'");
        }
        const bool coord = tok[2] == "x" || tok[2] == "y" || tok[2] == "z" ||
                           tok[2] == "nx" || tok[2] == "ny" || tok[2] == "nz";
        if (coord && elements.back().name == "vertex" && !detail::is_float_type(tok[1])) {
          throw PlyError(where() + ": property '" + tok[2] + "' must be float or double");
        }
        prop = {tok[2], false};
      } else {
        throw PlyError(where() + ": malformed property line");
      }
      elements.back().properties.push_back(prop);
    } else {
      throw PlyError(where() + ": unknown header keyword '" + tok[0] + "'");
    }
  }
  if (!have_format) throw PlyError(where() + ": missing format line");

  std::vector<Point3> points;
  std::vector<Vector3> normals;
  bool found_vertex = false;
  bool normals_valid = true;
  for (const auto& el : elements) {
    if (el.name != "vertex") {
      for (std::size_t i = 0; i < el.count; ++i) {
        if (!next_line()) throw PlyError(where() + ": unexpected end of data");
      }
      continue;
    }
    found_vertex = true;
    int ix[6] = {-1, -1, -1, -1, -1, -1};
    static constexpr std::string_view kNames[6] = {"x", "y", "z", "nx", "ny", "nz"};
    for (std::size_t p = 0; p < el.properties.size(); ++p) {
      for (int k = 0; k < 6; ++k) {
        if (el.properties[p].name == kNames[k]) ix[k] = static_cast<int>(p);
      }
    }
    if (ix[0] < 0 || ix[1] < 0 || ix[2] < 0) {
      throw PlyError(source_name + ": vertex element lacks x, y, z properties");
    }
    const bool has_normals = ix[3] >= 0 && ix[4] >= 0 && ix[5] >= 0;
    if (el.count == 0) throw PlyError(source_name + ": zero vertices");
    points.reserve(el.count);
    if (has_normals) normals.reserve(el.count);

    for (std::size_t v = 0; v < el.count; ++v) {
      if (!next_line()) throw PlyError(where() + ": unexpected end of vertex data");
      const auto tok = split(line);
      // Map property index -> token index, expanding list properties.
      std::vector<std::size_t> start(el.properties.size());
      std::size_t t = 0;
      for (std::size_t p = 0; p < el.properties.size(); ++p) {
        start[p] = t;
        if (t >= tok.size()) throw PlyError(where() + ": too few values");
        if (el.properties[p].is_list) {
          const double len = detail::parse_double(tok[t], where());
          if (len < 0 || len != std::floor(len)) throw PlyError(where() + ": bad list length");
          t += 1 + static_cast<std::size_t>(len);
        } else {
          t += 1;
        }
      }
      if (t != tok.size()) {
        throw PlyError(where() + (t > tok.size() ? ": too few values" : ": too many values"));
      }
      double val[6] = {};
      for (int k = 0; k < (has_normals ? 6 : 3); ++k) {
        val[k] = detail::parse_double(tok[start[static_cast<std::size_t>(ix[k])]], where());
      }
      const Point3 p(val[0], val[1], val[2]);
      if (!is_finite(p)) throw PlyError(where() + ": non-finite coordinate");
      points.push_back(p);
      if (has_normals) {
        const Vector3 n(val[3], val[4], val[5]);
        const double len = n.norm();
        if (!(len > 0.0) || !std::isfinite(len)) {
          normals_valid = false;
        } else {
          normals.push_back(n / len);
        }
      }
    }
    if (!has_normals) normals_valid = false;
  }
  if (!found_vertex) throw PlyError(source_name + ": no vertex element");
  if (!normals_valid) normals.clear();
  return PointCloud(std::move(points), std::move(normals));
}

inline PointCloud read_cloud(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PlyError("cannot open '" + path.string() + "' for reading");
  return read_cloud(in, path.string());
}

/// ASCII PLY with 9 significant digits per value; nx ny nz only when the
/// cloud has normals. LF line endings.
inline void write_cloud(const PointCloud& cloud, std::ostream& out) {
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n";
  if (cloud.has_normals()) {
    out << "property float nx\nproperty float ny\nproperty float nz\n";
  }
  out << "end_header\n";
  char buf[160];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.point(i);
    int n = std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g", p.x(), p.y(), p.z());
    out.write(buf, n);
    if (cloud.has_normals()) {
      const Vector3& v = cloud.normal(i);
      n = std::snprintf(buf, sizeof buf, " %.9g %.9g %.9g", v.x(), v.y(), v.z());
      out.write(buf, n);
    }
    out.put('\n');
  }
}

inline void write_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PlyError("cannot open '" + path.string() + "' for writing");
  write_cloud(cloud, out);
  out.flush();
  if (!out) throw PlyError("write failed for '" + path.string() + "'");
}

}  // namespace cloudmatch::ply
