#include "groundseg/ply_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "groundseg/error.hpp"

namespace groundseg {
namespace {

enum class Scalar { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::optional<Scalar> parse_scalar(const std::string& s) {
  if (s == "char" || s == "int8") return Scalar::Int8;
  if (s == "uchar" || s == "uint8") return Scalar::UInt8;
  if (s == "short" || s == "int16") return Scalar::Int16;
  if (s == "ushort" || s == "uint16") return Scalar::UInt16;
  if (s == "int" || s == "int32") return Scalar::Int32;
  if (s == "uint" || s == "uint32") return Scalar::UInt32;
  if (s == "float" || s == "float32") return Scalar::Float32;
  if (s == "double" || s == "float64") return Scalar::Float64;
  return std::nullopt;
}

std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::Int8:
    case Scalar::UInt8:
      return 1;
    case Scalar::Int16:
    case Scalar::UInt16:
      return 2;
    case Scalar::Int32:
    case Scalar::UInt32:
    case Scalar::Float32:
      return 4;
    case Scalar::Float64:
      return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  Scalar type = Scalar::Float32;
  bool is_list = false;
  Scalar count_type = Scalar::UInt8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
  // Scalar properties: one column per property. List properties: flattened
  // values plus per-instance offsets.
  std::vector<std::vector<double>> columns;
  std::vector<std::vector<double>> list_values;
  std::vector<std::vector<std::size_t>> list_offsets;

  int find(const std::string& prop) const {
    for (std::size_t i = 0; i < properties.size(); ++i) {
      if (properties[i].name == prop) return static_cast<int>(i);
    }
    return -1;
  }
};

enum class Encoding { Ascii, BinaryLE, BinaryBE };

struct PlyFile {
  Encoding encoding = Encoding::Ascii;
  std::vector<Element> elements;

  const Element* find(const std::string& name) const {
    for (const auto& e : elements) {
      if (e.name == name) return &e;
    }
    return nullptr;
  }
};

template <typename T>
T load(const unsigned char* p, bool swap) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if (swap) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

double decode(Scalar s, const unsigned char* p, bool swap) {
  switch (s) {
    case Scalar::Int8:
      return load<std::int8_t>(p, false);
    case Scalar::UInt8:
      return load<std::uint8_t>(p, false);
    case Scalar::Int16:
      return load<std::int16_t>(p, swap);
    case Scalar::UInt16:
      return load<std::uint16_t>(p, swap);
    case Scalar::Int32:
      return load<std::int32_t>(p, swap);
    case Scalar::UInt32:
      return load<std::uint32_t>(p, swap);
    case Scalar::Float32:
      return load<float>(p, swap);
    case Scalar::Float64:
      return load<double>(p, swap);
  }
  return 0.0;
}

PlyFile parse_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open PLY file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = path.string();

  // Header: newline-terminated lines up to "end_header".
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::string {
    if (pos >= bytes.size()) {
      throw ParseError(where + ": unexpected end of file in header at line " +
                       std::to_string(line_no + 1));
    }
    std::size_t end = pos;
    while (end < bytes.size() && bytes[end] != '\n') ++end;
    std::string line(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                     bytes.begin() + static_cast<std::ptrdiff_t>(end));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end < bytes.size() ? end + 1 : end;
    ++line_no;
    return line;
  };

  if (next_line() != "ply") throw ParseError(where + ": line 1: missing 'ply' magic");
  PlyFile ply;
  bool have_format = false;
  for (;;) {
    const std::string line = next_line();
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    const auto bad = [&](const std::string& what) {
      return ParseError(where + ": line " + std::to_string(line_no) + ": " + what);
    };
    if (keyword.empty() || keyword == "comment" || keyword == "obj_info") continue;
    if (keyword == "end_header") break;
    if (keyword == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "ascii") {
        ply.encoding = Encoding::Ascii;
      } else if (fmt == "binary_little_endian") {
        ply.encoding = Encoding::BinaryLE;
      } else if (fmt == "binary_big_endian") {
        ply.encoding = Encoding::BinaryBE;
      } else {
        throw bad("unknown format '" + fmt + "'");
      }
      have_format = true;
    } else if (keyword == "element") {
      Element e;
      long long count = -1;
      ls >> e.name >> count;
      if (e.name.empty() || !ls || count < 0) throw bad("malformed element declaration");
      e.count = static_cast<std::size_t>(count);
      ply.elements.push_back(std::move(e));
    } else if (keyword == "property") {
      if (ply.elements.empty()) throw bad("property before any element");
      Property p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type >> p.name;
        const auto ct = parse_scalar(count_type);
        const auto it = parse_scalar(item_type);
        if (!ct || !it || p.name.empty()) throw bad("malformed list property");
        p.is_list = true;
        p.count_type = *ct;
        p.type = *it;
      } else {
        ls >> p.name;
        const auto t = parse_scalar(type);
        if (!t || p.name.empty()) throw bad("unknown property type '" + type + "'");
        p.type = *t;
      }
      ply.elements.back().properties.push_back(p);
    } else {
      throw bad("unexpected header keyword '" + keyword + "'");
    }
  }
  if (!have_format) throw ParseError(where + ": header has no format line");

  for (auto& e : ply.elements) {
    e.columns.assign(e.properties.size(), {});
    e.list_values.assign(e.properties.size(), {});
    e.list_offsets.assign(e.properties.size(), {});
    for (std::size_t p = 0; p < e.properties.size(); ++p) {
      if (e.properties[p].is_list) {
        e.list_offsets[p].reserve(e.count + 1);
        e.list_offsets[p].push_back(0);
      } else {
        e.columns[p].reserve(e.count);
      }
    }
  }

  if (ply.encoding == Encoding::Ascii) {
    for (auto& e : ply.elements) {
      for (std::size_t i = 0; i < e.count; ++i) {
        std::string line;
        do {
          if (pos >= bytes.size()) {
            throw ParseError(where + ": truncated body: expected " + std::to_string(e.count) +
                             " '" + e.name + "' records, file ends at line " +
                             std::to_string(line_no));
          }
          line = next_line();
        } while (line.find_first_not_of(" \t") == std::string::npos);
        std::istringstream ls(line);
        const auto bad = [&](const std::string& what) {
          return ParseError(where + ": line " + std::to_string(line_no) + ": " + what);
        };
        auto read_number = [&]() {
          std::string tok;
          if (!(ls >> tok)) throw bad("too few values in '" + e.name + "' record");
          try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) throw bad("bad number '" + tok + "'");
            return v;
          } catch (const std::invalid_argument&) {
            throw bad("bad number '" + tok + "'");
          } catch (const std::out_of_range&) {
            throw bad("number out of range '" + tok + "'");
          }
        };
        for (std::size_t p = 0; p < e.properties.size(); ++p) {
          if (e.properties[p].is_list) {
            const double n = read_number();
            if (n < 0 || n != std::floor(n)) throw bad("bad list length");
            for (int k = 0; k < static_cast<int>(n); ++k) e.list_values[p].push_back(read_number());
            e.list_offsets[p].push_back(e.list_values[p].size());
          } else {
            e.columns[p].push_back(read_number());
          }
        }
      }
    }
  } else {
    const bool swap = (ply.encoding == Encoding::BinaryLE) != (std::endian::native == std::endian::little);
    auto need = [&](std::size_t n, const Element& e) {
      if (pos + n > bytes.size()) {
        throw ParseError(where + ": truncated body at byte " + std::to_string(pos) + " while reading '" +
                         e.name + "' (need " + std::to_string(n) + " bytes, " +
                         std::to_string(bytes.size() - pos) + " left)");
      }
    };
    for (auto& e : ply.elements) {
      for (std::size_t i = 0; i < e.count; ++i) {
        for (std::size_t p = 0; p < e.properties.size(); ++p) {
          const auto& prop = e.properties[p];
          if (prop.is_list) {
            need(scalar_size(prop.count_type), e);
            const double n = decode(prop.count_type, &bytes[pos], swap);
            if (n < 0) {
              throw ParseError(where + ": negative list length at byte " + std::to_string(pos));
            }
            pos += scalar_size(prop.count_type);
            const auto len = static_cast<std::size_t>(n);
            need(len * scalar_size(prop.type), e);
            for (std::size_t k = 0; k < len; ++k) {
              e.list_values[p].push_back(decode(prop.type, &bytes[pos], swap));
              pos += scalar_size(prop.type);
            }
            e.list_offsets[p].push_back(e.list_values[p].size());
          } else {
            need(scalar_size(prop.type), e);
            e.columns[p].push_back(decode(prop.type, &bytes[pos], swap));
            pos += scalar_size(prop.type);
          }
        }
      }
    }
  }
  return ply;
}

struct VertexColumns {
  std::vector<Eigen::Vector3d> positions;
  std::optional<std::vector<Rgb>> colors;
  std::optional<std::vector<MaterialLabel>> labels;
};

VertexColumns read_vertices(const PlyFile& ply, const std::string& where) {
  VertexColumns out;
  const Element* v = ply.find("vertex");
  if (!v) throw ParseError(where + ": no 'vertex' element");
  const int ix = v->find("x"), iy = v->find("y"), iz = v->find("z");
  if (ix < 0 || iy < 0 || iz < 0) throw ParseError(where + ": vertex element lacks x/y/z");
  for (int p : {ix, iy, iz}) {
    if (v->properties[p].is_list) throw ParseError(where + ": coordinate property is a list");
  }
  out.positions.resize(v->count);
  for (std::size_t i = 0; i < v->count; ++i) {
    out.positions[i] = {v->columns[ix][i], v->columns[iy][i], v->columns[iz][i]};
    if (!out.positions[i].allFinite()) {
      throw ParseError(where + ": non-finite coordinate in vertex record " + std::to_string(i));
    }
  }
  const int ir = v->find("red"), ig = v->find("green"), ib = v->find("blue");
  if (ir >= 0 && ig >= 0 && ib >= 0) {
    auto& colors = out.colors.emplace(v->count);
    auto channel = [&](int p, std::size_t i) {
      const double c = v->columns[p][i];
      if (!(c >= 0.0 && c <= 255.0)) {
        throw ParseError(where + ": color out of range in vertex record " + std::to_string(i));
      }
      return static_cast<std::uint8_t>(std::lround(c));
    };
    for (std::size_t i = 0; i < v->count; ++i) {
      colors[i] = {channel(ir, i), channel(ig, i), channel(ib, i)};
    }
  }
  const int il = v->find("label");
  if (il >= 0 && !v->properties[il].is_list) {
    auto& labels = out.labels.emplace(v->count);
    for (std::size_t i = 0; i < v->count; ++i) {
      const double c = v->columns[il][i];
      const auto l = c == std::floor(c) ? label_from_code(static_cast<int>(c)) : std::nullopt;
      if (!l) {
        throw ParseError(where + ": invalid label value " + std::to_string(c) + " in vertex record " +
                         std::to_string(i));
      }
      labels[i] = *l;
    }
  }
  return out;
}

class PlyWriter {
 public:
  PlyWriter(const std::filesystem::path& path, PlyFormat format)
      : path_(path), format_(format), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
    out_ << "ply\nformat "
         << (format == PlyFormat::Ascii ? "ascii" : "binary_little_endian") << " 1.0\n";
  }

  std::ostream& header() { return out_; }

  void f64(double v) {
    if (format_ == PlyFormat::Ascii) {
      text(v);
    } else {
      put(v);
    }
  }
  void u8(std::uint8_t v) {
    if (format_ == PlyFormat::Ascii) {
      text(static_cast<int>(v));
    } else {
      put(v);
    }
  }
  void i32(std::int32_t v) {
    if (format_ == PlyFormat::Ascii) {
      text(v);
    } else {
      put(v);
    }
  }
  void end_record() {
    if (format_ == PlyFormat::Ascii) {
      out_ << '\n';
      first_ = true;
    }
  }
  void finish() {
    out_.flush();
    if (!out_) throw IoError("write failed for " + path_.string());
  }

 private:
  template <typename T>
  void put(T v) {
    if constexpr (std::endian::native == std::endian::big) {
      unsigned char b[sizeof(T)];
      std::memcpy(b, &v, sizeof(T));
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
      out_.write(reinterpret_cast<const char*>(b), sizeof(T));
    } else {
      out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
  }
  template <typename T>
  void text(T v) {
    if (!first_) out_ << ' ';
    first_ = false;
    if constexpr (std::is_floating_point_v<T>) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out_ << buf;
    } else {
      out_ << v;
    }
  }

  std::filesystem::path path_;
  PlyFormat format_;
  std::ofstream out_;
  bool first_ = true;
};

void write_vertex_header(std::ostream& h, std::size_t n, bool colors, bool labels) {
  h << "element vertex " << n << "\n"
    << "property double x\nproperty double y\nproperty double z\n";
  if (colors) h << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (labels) h << "property uchar label\n";
}

}  // namespace

PointCloud read_point_cloud(const std::filesystem::path& path) {
  const auto ply = parse_ply(path);
  auto v = read_vertices(ply, path.string());
  return PointCloud(std::move(v.positions), std::move(v.colors), std::move(v.labels));
}

void write_point_cloud(const PointCloud& cloud, const std::filesystem::path& path, PlyFormat format) {
  PlyWriter w(path, format);
  if (cloud.point_spacing()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", *cloud.point_spacing());
    w.header() << "comment point_spacing " << buf << "\n";
  }
  write_vertex_header(w.header(), cloud.size(), cloud.has_colors(), cloud.has_labels());
  w.header() << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.position(i);
    w.f64(p.x());
    w.f64(p.y());
    w.f64(p.z());
    if (cloud.has_colors()) {
      const auto c = cloud.colors()[i];
      w.u8(c.r);
      w.u8(c.g);
      w.u8(c.b);
    }
    if (cloud.has_labels()) w.u8(static_cast<std::uint8_t>(cloud.labels()[i]));
    w.end_record();
  }
  w.finish();
}

TriangleMesh read_mesh(const std::filesystem::path& path) {
  const auto ply = parse_ply(path);
  auto v = read_vertices(ply, path.string());
  TriangleMesh mesh;
  mesh.vertices = std::move(v.positions);
  mesh.colors = std::move(v.colors);
  const Element* f = ply.find("face");
  if (!f) throw ParseError(path.string() + ": no 'face' element");
  int pi = f->find("vertex_indices");
  if (pi < 0) pi = f->find("vertex_index");
  if (pi < 0 || !f->properties[pi].is_list) {
    throw ParseError(path.string() + ": face element lacks a vertex_indices list");
  }
  const auto& offs = f->list_offsets[pi];
  const auto& vals = f->list_values[pi];
  for (std::size_t i = 0; i < f->count; ++i) {
    const auto b = offs[i], e = offs[i + 1];
    if (e - b < 3) throw ParseError(path.string() + ": face " + std::to_string(i) + " has < 3 vertices");
    // Polygons are fan-triangulated.
    for (std::size_t k = b + 1; k + 1 < e; ++k) {
      mesh.triangles.push_back({static_cast<std::uint32_t>(vals[b]), static_cast<std::uint32_t>(vals[k]),
                                static_cast<std::uint32_t>(vals[k + 1])});
    }
  }
  mesh.validate();
  return mesh;
}

void write_mesh(const TriangleMesh& mesh, const std::filesystem::path& path, PlyFormat format) {
  PlyWriter w(path, format);
  write_vertex_header(w.header(), mesh.vertices.size(), mesh.colors.has_value(), false);
  w.header() << "element face " << mesh.triangles.size() << "\n"
             << "property list uchar int vertex_indices\nend_header\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    w.f64(mesh.vertices[i].x());
    w.f64(mesh.vertices[i].y());
    w.f64(mesh.vertices[i].z());
    if (mesh.colors) {
      const auto c = (*mesh.colors)[i];
      w.u8(c.r);
      w.u8(c.g);
      w.u8(c.b);
    }
    w.end_record();
  }
  for (const auto& t : mesh.triangles) {
    w.u8(3);
    for (const auto idx : t) w.i32(static_cast<std::int32_t>(idx));
    w.end_record();
  }
  w.finish();
}

}  // namespace groundseg
