#include "gridfuse/point_cloud.hpp"

#include "gridfuse/errors.hpp"
#include "gridfuse/npy.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <sstream>

namespace gridfuse {

void PointCloud::validate() const {
  const std::size_t n = positions.size();
  if (colors && colors->size() != n) throw DataError("point cloud color column length mismatch");
  if (intensity && intensity->size() != n) throw DataError("point cloud intensity column length mismatch");
  if (labels && labels->size() != n) throw DataError("point cloud label column length mismatch");
}

namespace {

enum class Scalar { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

Scalar parse_scalar(const std::string& name) {
  if (name == "char" || name == "int8") return Scalar::Int8;
  if (name == "uchar" || name == "uint8") return Scalar::UInt8;
  if (name == "short" || name == "int16") return Scalar::Int16;
  if (name == "ushort" || name == "uint16") return Scalar::UInt16;
  if (name == "int" || name == "int32") return Scalar::Int32;
  if (name == "uint" || name == "uint32") return Scalar::UInt32;
  if (name == "float" || name == "float32") return Scalar::Float32;
  if (name == "double" || name == "float64") return Scalar::Float64;
  throw DataError("PLY: unknown property type '" + name + "'");
}

std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::Int8:
    case Scalar::UInt8: return 1;
    case Scalar::Int16:
    case Scalar::UInt16: return 2;
    case Scalar::Int32:
    case Scalar::UInt32:
    case Scalar::Float32: return 4;
    case Scalar::Float64: return 8;
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
};

template <typename T>
T load_raw(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double read_binary(Scalar s, const char* p) {
  switch (s) {
    case Scalar::Int8: return load_raw<std::int8_t>(p);
    case Scalar::UInt8: return load_raw<std::uint8_t>(p);
    case Scalar::Int16: return load_raw<std::int16_t>(p);
    case Scalar::UInt16: return load_raw<std::uint16_t>(p);
    case Scalar::Int32: return load_raw<std::int32_t>(p);
    case Scalar::UInt32: return load_raw<std::uint32_t>(p);
    case Scalar::Float32: return load_raw<float>(p);
    case Scalar::Float64: return load_raw<double>(p);
  }
  return 0.0;
}

class Reader {
 public:
  Reader(std::string_view bytes, std::size_t pos, bool ascii) : bytes_(bytes), pos_(pos), ascii_(ascii) {}

  double next(Scalar s) { return ascii_ ? next_token() : next_binary(s); }

  std::size_t next_count(Scalar s) {
    const double v = next(s);
    if (!(v >= 0.0) || v > 1e9 || v != std::floor(v)) throw DataError("PLY: invalid list length");
    return static_cast<std::size_t>(v);
  }

 private:
  double next_binary(Scalar s) {
    const std::size_t n = scalar_size(s);
    if (pos_ + n > bytes_.size()) throw DataError("PLY: unexpected end of binary data");
    const double v = read_binary(s, bytes_.data() + pos_);
    pos_ += n;
    return v;
  }

  double next_token() {
    while (pos_ < bytes_.size() && std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (pos_ >= bytes_.size()) throw DataError("PLY: unexpected end of ASCII data");
    std::size_t end = pos_;
    while (end < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[end]))) ++end;
    const std::string tok(bytes_.substr(pos_, end - pos_));
    pos_ = end;
    char* stop = nullptr;
    const double v = std::strtod(tok.c_str(), &stop);
    if (stop == tok.c_str() || *stop != '\0') throw DataError("PLY: malformed number '" + tok.substr(0, 32) + "'");
    return v;
  }

  std::string_view bytes_;
  std::size_t pos_;
  bool ascii_;
};

}  // namespace

PointCloud parse_ply(const std::string& bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    if (pos >= bytes.size()) throw DataError("PLY: header not terminated by end_header");
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw DataError("PLY: header not terminated by end_header");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  if (next_line() != "ply") throw DataError("PLY: missing 'ply' magic");
  bool ascii = false;
  bool have_format = false;
  std::vector<Element> elements;
  for (;;) {
    const std::string line = next_line();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw.empty() || kw == "comment" || kw == "obj_info") continue;
    if (kw == "end_header") break;
    if (kw == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt == "ascii") ascii = true;
      else if (fmt == "binary_little_endian") ascii = false;
      else throw DataError("PLY: unsupported format '" + fmt + "'");
      have_format = true;
    } else if (kw == "element") {
      Element e;
      long long count = -1;
      ls >> e.name >> count;
      if (e.name.empty() || count < 0 || !ls) throw DataError("PLY: malformed element line '" + line + "'");
      e.count = static_cast<std::size_t>(count);
      elements.push_back(std::move(e));
    } else if (kw == "property") {
      if (elements.empty()) throw DataError("PLY: property before any element");
      Property p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = parse_scalar(ct);
        p.type = parse_scalar(it);
      } else {
        p.type = parse_scalar(type);
        ls >> p.name;
      }
      if (p.name.empty()) throw DataError("PLY: property without a name");
      elements.back().properties.push_back(std::move(p));
    } else {
      throw DataError("PLY: unknown header keyword '" + kw + "'");
    }
  }
  if (!have_format) throw DataError("PLY: missing format line");

  PointCloud cloud;
  bool found_vertex = false;
  Reader reader(bytes, pos, ascii);
  for (const auto& e : elements) {
    if (e.name != "vertex") {
      // Skip foreign elements record by record.
      for (std::size_t i = 0; i < e.count; ++i)
        for (const auto& p : e.properties) {
          if (p.is_list) {
            const std::size_t n = reader.next_count(p.count_type);
            for (std::size_t j = 0; j < n; ++j) reader.next(p.type);
          } else {
            reader.next(p.type);
          }
        }
      continue;
    }
    if (found_vertex) throw DataError("PLY: duplicate vertex element");
    found_vertex = true;

    int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1, ii = -1, il = -1;
    for (int i = 0; i < static_cast<int>(e.properties.size()); ++i) {
      const auto& n = e.properties[i].name;
      if (e.properties[i].is_list) continue;
      if (n == "x") ix = i;
      else if (n == "y") iy = i;
      else if (n == "z") iz = i;
      else if (n == "red") ir = i;
      else if (n == "green") ig = i;
      else if (n == "blue") ib = i;
      else if (n == "intensity") ii = i;
      else if (n == "label" || n == "classification") il = i;
    }
    if (ix < 0 || iy < 0 || iz < 0) throw DataError("PLY: vertex element lacks x/y/z properties");
    const bool has_rgb = ir >= 0 && ig >= 0 && ib >= 0;

    // Each record occupies at least one byte, which bounds the allocation.
    if (e.count > bytes.size()) throw DataError("PLY: vertex count exceeds file size");
    cloud.positions.resize(e.count);
    if (has_rgb) cloud.colors.emplace(e.count);
    if (ii >= 0) cloud.intensity.emplace(e.count);
    if (il >= 0) cloud.labels.emplace(e.count);

    std::vector<double> values(e.properties.size());
    for (std::size_t r = 0; r < e.count; ++r) {
      for (std::size_t k = 0; k < e.properties.size(); ++k) {
        const auto& p = e.properties[k];
        if (p.is_list) {
          const std::size_t n = reader.next_count(p.count_type);
          for (std::size_t j = 0; j < n; ++j) reader.next(p.type);
          values[k] = 0.0;
        } else {
          values[k] = reader.next(p.type);
        }
      }
      cloud.positions[r] = Vec3(values[ix], values[iy], values[iz]);
      if (!std::isfinite(values[ix]) || !std::isfinite(values[iy]) || !std::isfinite(values[iz]))
        throw DataError("PLY: non-finite coordinate in vertex " + std::to_string(r));
      auto to_u8 = [&](double v, const char* what) {
        if (!(v >= 0.0 && v <= 255.0) || v != std::floor(v))
          throw DataError(std::string("PLY: ") + what + " value out of uint8 range in vertex " + std::to_string(r));
        return static_cast<std::uint8_t>(v);
      };
      if (has_rgb)
        (*cloud.colors)[r] = {to_u8(values[ir], "red"), to_u8(values[ig], "green"), to_u8(values[ib], "blue")};
      if (ii >= 0) (*cloud.intensity)[r] = static_cast<float>(values[ii]);
      if (il >= 0) (*cloud.labels)[r] = to_u8(values[il], "label");
    }
  }
  if (!found_vertex) throw DataError("PLY: no vertex element");
  return cloud;
}

PointCloud read_ply(const std::filesystem::path& path) {
  try {
    return parse_ply(npy::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string serialize_ply(const PointCloud& cloud, PlyFormat format) {
  cloud.validate();
  std::string out;
  out += "ply\n";
  out += format == PlyFormat::Ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  if (cloud.colors) out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (cloud.intensity) out += "property float intensity\n";
  if (cloud.labels) out += "property uchar label\n";
  out += "end_header\n";

  auto put = [&out](const auto& v) { out.append(reinterpret_cast<const char*>(&v), sizeof(v)); };
  auto put_num = [&out](double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
  };
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.positions[i];
    if (format == PlyFormat::BinaryLittleEndian) {
      put(p.x());
      put(p.y());
      put(p.z());
      if (cloud.colors) for (auto c : (*cloud.colors)[i]) put(c);
      if (cloud.intensity) put((*cloud.intensity)[i]);
      if (cloud.labels) put((*cloud.labels)[i]);
    } else {
      put_num(p.x());
      out += ' ';
      put_num(p.y());
      out += ' ';
      put_num(p.z());
      if (cloud.colors)
        for (auto c : (*cloud.colors)[i]) out += " " + std::to_string(c);
      if (cloud.intensity) {
        out += ' ';
        char buf[32];
        auto res = std::to_chars(buf, buf + sizeof(buf), (*cloud.intensity)[i]);
        out.append(buf, res.ptr);
      }
      if (cloud.labels) out += " " + std::to_string((*cloud.labels)[i]);
      out += '\n';
    }
  }
  return out;
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud, PlyFormat format) {
  npy::write_file(path, serialize_ply(cloud, format));
}

}  // namespace gridfuse
