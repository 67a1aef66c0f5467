#include "gridfuse/npy.hpp"

#include "gridfuse/errors.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <type_traits>

static_assert(std::endian::native == std::endian::little, "gridfuse assumes a little-endian host");

namespace gridfuse::npy {

namespace {

constexpr char kMagic[] = "\x93NUMPY";

struct DTypeInfo {
  DType type;
  const char* descr;
  std::size_t size;
};

constexpr DTypeInfo kDTypes[] = {
    {DType::Float32, "<f4", 4}, {DType::Float64, "<f8", 8}, {DType::UInt8, "|u1", 1},
    {DType::Int32, "<i4", 4},   {DType::Int64, "<i8", 8},
};

const DTypeInfo& info(DType t) {
  for (const auto& d : kDTypes)
    if (d.type == t) return d;
  throw std::logic_error("unknown dtype");
}

DType parse_descr(const std::string& descr) {
  if (descr.size() != 3) throw DataError("unsupported NPY dtype '" + descr + "'");
  const char order = descr[0];
  if (order == '>') throw DataError("big-endian NPY dtype '" + descr + "' is not supported");
  const std::string body = descr.substr(1);
  if (body == "u1" && (order == '|' || order == '<' || order == '=')) return DType::UInt8;
  if (order != '<' && order != '=' && order != '|') throw DataError("unsupported NPY dtype '" + descr + "'");
  if (body == "f4") return DType::Float32;
  if (body == "f8") return DType::Float64;
  if (body == "i4") return DType::Int32;
  if (body == "i8") return DType::Int64;
  throw DataError("unsupported NPY dtype '" + descr + "'");
}

std::string header_value(const std::string& header, const std::string& key) {
  const std::string quoted = "'" + key + "'";
  const auto pos = header.find(quoted);
  if (pos == std::string::npos) throw DataError("NPY header missing key " + quoted);
  auto colon = header.find(':', pos + quoted.size());
  if (colon == std::string::npos) throw DataError("NPY header malformed near " + quoted);
  auto start = header.find_first_not_of(" ", colon + 1);
  if (start == std::string::npos) throw DataError("NPY header malformed near " + quoted);
  if (header[start] == '\'') {
    const auto end = header.find('\'', start + 1);
    if (end == std::string::npos) throw DataError("NPY header malformed near " + quoted);
    return header.substr(start + 1, end - start - 1);
  }
  if (header[start] == '(') {
    const auto end = header.find(')', start);
    if (end == std::string::npos) throw DataError("NPY header malformed near " + quoted);
    return header.substr(start, end - start + 1);
  }
  const auto end = header.find_first_of(",}", start);
  if (end == std::string::npos) throw DataError("NPY header malformed near " + quoted);
  auto v = header.substr(start, end - start);
  while (!v.empty() && v.back() == ' ') v.pop_back();
  return v;
}

std::vector<std::size_t> parse_shape(const std::string& tuple) {
  std::vector<std::size_t> shape;
  std::string body = tuple.substr(1, tuple.size() - 2);
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" ");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" ");
    item = item.substr(b, e - b + 1);
    if (item.empty() || !std::all_of(item.begin(), item.end(), [](char c) { return c >= '0' && c <= '9'; }))
      throw DataError("NPY shape entry '" + item + "' is not a non-negative integer");
    if (item.size() > 15) throw DataError("NPY shape entry too large");
    shape.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  return shape;
}

template <typename T>
void put_le(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_le(std::string_view in, std::size_t offset) {
  if (offset + sizeof(T) > in.size()) throw DataError("archive truncated");
  T v;
  std::memcpy(&v, in.data() + offset, sizeof(T));
  return v;
}

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string inflate_raw(std::string_view compressed, std::size_t expected) {
  std::string out(expected, '\0');
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw DataError("zlib initialisation failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
  zs.avail_in = static_cast<uInt>(compressed.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) throw DataError("corrupt deflate stream in archive");
  return out;
}

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
constexpr std::uint32_t kZip64EndSig = 0x06064b50;
constexpr std::uint32_t kZip64LocatorSig = 0x07064b50;
// 1980-01-01 00:00, so archives are byte-stable.
constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;
constexpr std::uint16_t kDosTime = 0;

}  // namespace

std::size_t dtype_size(DType t) { return info(t).size; }
std::string dtype_descr(DType t) { return info(t).descr; }

std::size_t Array::element_count() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

template <typename T>
std::vector<T> Array::to_vector() const {
  if (dtype != dtype_of<T>())
    throw DataError("array has dtype " + dtype_descr(dtype) + ", expected " + dtype_descr(dtype_of<T>()));
  std::vector<T> out(element_count());
  std::memcpy(out.data(), data.data(), out.size() * sizeof(T));
  return out;
}

template <typename T>
Array make_array(std::span<const T> values, std::vector<std::size_t> shape) {
  Array a;
  a.dtype = dtype_of<T>();
  a.shape = std::move(shape);
  if (a.element_count() != values.size()) throw std::invalid_argument("array shape does not match value count");
  a.data.resize(values.size_bytes());
  std::memcpy(a.data.data(), values.data(), values.size_bytes());
  return a;
}

template <typename T>
std::vector<T> convert(const Array& a) {
  const std::size_t n = a.element_count();
  std::vector<T> out(n);
  auto fill = [&](auto tag) {
    using S = decltype(tag);
    const auto* src = reinterpret_cast<const S*>(a.data.data());
    for (std::size_t i = 0; i < n; ++i) {
      S v;
      std::memcpy(&v, src + i, sizeof(S));
      if constexpr (std::is_integral_v<T>) {
        const long double lv = static_cast<long double>(v);
        if (!(lv >= static_cast<long double>(std::numeric_limits<T>::min()) &&
              lv <= static_cast<long double>(std::numeric_limits<T>::max())))
          throw DataError("value " + std::to_string(static_cast<double>(v)) + " out of range for target type");
        if constexpr (std::is_floating_point_v<S>) {
          if (lv != static_cast<long double>(static_cast<T>(v))) throw DataError("non-integral value in integer array");
        }
      }
      out[i] = static_cast<T>(v);
    }
  };
  switch (a.dtype) {
    case DType::Float32: fill(float{}); break;
    case DType::Float64: fill(double{}); break;
    case DType::UInt8: fill(std::uint8_t{}); break;
    case DType::Int32: fill(std::int32_t{}); break;
    case DType::Int64: fill(std::int64_t{}); break;
  }
  return out;
}

#define GRIDFUSE_NPY_INSTANTIATE(T)                                             \
  template std::vector<T> Array::to_vector<T>() const;                          \
  template Array make_array<T>(std::span<const T>, std::vector<std::size_t>);   \
  template std::vector<T> convert<T>(const Array&);
GRIDFUSE_NPY_INSTANTIATE(float)
GRIDFUSE_NPY_INSTANTIATE(double)
GRIDFUSE_NPY_INSTANTIATE(std::uint8_t)
GRIDFUSE_NPY_INSTANTIATE(std::int32_t)
GRIDFUSE_NPY_INSTANTIATE(std::int64_t)
#undef GRIDFUSE_NPY_INSTANTIATE

std::string encode(const Array& a) {
  if (a.data.size() != a.element_count() * dtype_size(a.dtype))
    throw std::invalid_argument("array payload size does not match shape");
  std::string shape = "(";
  for (std::size_t i = 0; i < a.shape.size(); ++i) {
    shape += std::to_string(a.shape[i]);
    if (a.shape.size() == 1 || i + 1 < a.shape.size()) shape += ",";
    if (i + 1 < a.shape.size()) shape += " ";
  }
  shape += ")";
  std::string header = "{'descr': '" + dtype_descr(a.dtype) + "', 'fortran_order': False, 'shape': " + shape + ", }";
  const std::size_t preamble = 10;
  const std::size_t total = ((preamble + header.size() + 1 + 63) / 64) * 64;
  header.append(total - preamble - header.size() - 1, ' ');
  header.push_back('\n');
  if (header.size() > std::numeric_limits<std::uint16_t>::max()) throw std::invalid_argument("NPY header too long");

  std::string out;
  out.reserve(total + a.data.size());
  out.append(kMagic, 6);
  out.push_back('\x01');
  out.push_back('\x00');
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(header.size()));
  out += header;
  out.append(reinterpret_cast<const char*>(a.data.data()), a.data.size());
  return out;
}

Array decode(std::string_view bytes) {
  if (bytes.size() < 10 || bytes.substr(0, 6) != std::string_view(kMagic, 6)) throw DataError("not an NPY file (bad magic)");
  const auto major = static_cast<unsigned char>(bytes[6]);
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    header_len = get_le<std::uint16_t>(bytes, 8);
    offset = 10;
  } else if (major == 2 || major == 3) {
    header_len = get_le<std::uint32_t>(bytes, 8);
    offset = 12;
  } else {
    throw DataError("unsupported NPY version " + std::to_string(major));
  }
  if (offset + header_len > bytes.size()) throw DataError("NPY header truncated");
  const std::string header(bytes.substr(offset, header_len));
  const DType dtype = parse_descr(header_value(header, "descr"));
  if (header_value(header, "fortran_order") != "False") throw DataError("Fortran-ordered NPY arrays are not supported");
  const std::string shape_str = header_value(header, "shape");
  if (shape_str.size() < 2 || shape_str.front() != '(') throw DataError("NPY shape is not a tuple");

  Array a;
  a.dtype = dtype;
  a.shape = parse_shape(shape_str);
  const std::size_t payload = offset + header_len;
  std::size_t count = 1;
  for (auto d : a.shape) {
    if (d != 0 && count > std::numeric_limits<std::size_t>::max() / d / 8) throw DataError("NPY shape overflows");
    count *= d;
  }
  const std::size_t nbytes = count * dtype_size(dtype);
  if (bytes.size() - payload != nbytes)
    throw DataError("NPY payload has " + std::to_string(bytes.size() - payload) + " bytes, expected " +
                    std::to_string(nbytes));
  a.data.resize(nbytes);
  std::memcpy(a.data.data(), bytes.data() + payload, nbytes);
  return a;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

Array load(const std::filesystem::path& path) {
  try {
    return decode(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save(const std::filesystem::path& path, const Array& a) { write_file(path, encode(a)); }

std::string encode_npz(const std::map<std::string, Array>& entries) {
  struct Central {
    std::string name;
    std::uint32_t crc;
    std::uint32_t size;
    std::uint32_t offset;
  };
  std::string out;
  std::vector<Central> central;
  for (const auto& [key, array] : entries) {
    const std::string name = key + ".npy";
    const std::string payload = encode(array);
    if (payload.size() >= 0xFFFFFFFFu || out.size() >= 0xFFFFFFFFu)
      throw std::invalid_argument("archive entries larger than 4 GiB are not supported");
    Central c{name, crc32_of(payload), static_cast<std::uint32_t>(payload.size()),
              static_cast<std::uint32_t>(out.size())};
    put_le<std::uint32_t>(out, kLocalSig);
    put_le<std::uint16_t>(out, 20);  // version needed
    put_le<std::uint16_t>(out, 0);   // flags
    put_le<std::uint16_t>(out, 0);   // stored
    put_le<std::uint16_t>(out, kDosTime);
    put_le<std::uint16_t>(out, kDosDate);
    put_le<std::uint32_t>(out, c.crc);
    put_le<std::uint32_t>(out, c.size);
    put_le<std::uint32_t>(out, c.size);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    put_le<std::uint16_t>(out, 0);
    out += name;
    out += payload;
    central.push_back(std::move(c));
  }
  const auto cd_offset = static_cast<std::uint32_t>(out.size());
  for (const auto& c : central) {
    put_le<std::uint32_t>(out, kCentralSig);
    put_le<std::uint16_t>(out, 20);  // version made by
    put_le<std::uint16_t>(out, 20);  // version needed
    put_le<std::uint16_t>(out, 0);
    put_le<std::uint16_t>(out, 0);
    put_le<std::uint16_t>(out, kDosTime);
    put_le<std::uint16_t>(out, kDosDate);
    put_le<std::uint32_t>(out, c.crc);
    put_le<std::uint32_t>(out, c.size);
    put_le<std::uint32_t>(out, c.size);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(c.name.size()));
    put_le<std::uint16_t>(out, 0);  // extra
    put_le<std::uint16_t>(out, 0);  // comment
    put_le<std::uint16_t>(out, 0);  // disk
    put_le<std::uint16_t>(out, 0);  // internal attrs
    put_le<std::uint32_t>(out, 0);  // external attrs
    put_le<std::uint32_t>(out, c.offset);
    out += c.name;
  }
  const auto cd_size = static_cast<std::uint32_t>(out.size() - cd_offset);
  put_le<std::uint32_t>(out, kEndSig);
  put_le<std::uint16_t>(out, 0);
  put_le<std::uint16_t>(out, 0);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(central.size()));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(central.size()));
  put_le<std::uint32_t>(out, cd_size);
  put_le<std::uint32_t>(out, cd_offset);
  put_le<std::uint16_t>(out, 0);
  return out;
}

std::map<std::string, Array> decode_npz(std::string_view bytes) {
  if (bytes.size() < 22) throw DataError("archive too small to be a zip container");
  std::size_t eocd = std::string_view::npos;
  const std::size_t lowest = bytes.size() > 22 + 65535 ? bytes.size() - 22 - 65535 : 0;
  for (std::size_t i = bytes.size() - 22 + 1; i-- > lowest;) {
    if (get_le<std::uint32_t>(bytes, i) == kEndSig) {
      eocd = i;
      break;
    }
  }
  if (eocd == std::string_view::npos) throw DataError("zip end-of-central-directory record not found");

  std::uint64_t entry_count = get_le<std::uint16_t>(bytes, eocd + 10);
  std::uint64_t cd_offset = get_le<std::uint32_t>(bytes, eocd + 16);
  if ((entry_count == 0xFFFF || cd_offset == 0xFFFFFFFFu) && eocd >= 20 &&
      get_le<std::uint32_t>(bytes, eocd - 20) == kZip64LocatorSig) {
    const auto z64 = get_le<std::uint64_t>(bytes, eocd - 20 + 8);
    if (get_le<std::uint32_t>(bytes, z64) != kZip64EndSig) throw DataError("corrupt zip64 end record");
    entry_count = get_le<std::uint64_t>(bytes, z64 + 32);
    cd_offset = get_le<std::uint64_t>(bytes, z64 + 48);
  }

  std::map<std::string, Array> result;
  std::size_t pos = cd_offset;
  for (std::uint64_t e = 0; e < entry_count; ++e) {
    if (get_le<std::uint32_t>(bytes, pos) != kCentralSig) throw DataError("corrupt zip central directory");
    const auto flags = get_le<std::uint16_t>(bytes, pos + 8);
    const auto method = get_le<std::uint16_t>(bytes, pos + 10);
    const auto crc = get_le<std::uint32_t>(bytes, pos + 16);
    std::uint64_t csize = get_le<std::uint32_t>(bytes, pos + 20);
    std::uint64_t usize = get_le<std::uint32_t>(bytes, pos + 24);
    const auto name_len = get_le<std::uint16_t>(bytes, pos + 28);
    const auto extra_len = get_le<std::uint16_t>(bytes, pos + 30);
    const auto comment_len = get_le<std::uint16_t>(bytes, pos + 32);
    std::uint64_t local = get_le<std::uint32_t>(bytes, pos + 42);
    if (pos + 46 + name_len + extra_len > bytes.size()) throw DataError("archive truncated");
    const std::string name(bytes.substr(pos + 46, name_len));
    // zip64 extended information: only fields saturated in the fixed record are present.
    std::size_t x = pos + 46 + name_len;
    const std::size_t xend = x + extra_len;
    while (x + 4 <= xend) {
      const auto id = get_le<std::uint16_t>(bytes, x);
      const auto len = get_le<std::uint16_t>(bytes, x + 2);
      if (id == 0x0001) {
        std::size_t f = x + 4;
        if (usize == 0xFFFFFFFFu) { usize = get_le<std::uint64_t>(bytes, f); f += 8; }
        if (csize == 0xFFFFFFFFu) { csize = get_le<std::uint64_t>(bytes, f); f += 8; }
        if (local == 0xFFFFFFFFu) { local = get_le<std::uint64_t>(bytes, f); }
      }
      x += 4 + len;
    }
    pos += 46 + name_len + extra_len + comment_len;

    if (flags & 0x1) throw DataError("encrypted archive entry '" + name + "'");
    if (get_le<std::uint32_t>(bytes, local) != kLocalSig) throw DataError("corrupt local header for '" + name + "'");
    const auto lname = get_le<std::uint16_t>(bytes, local + 26);
    const auto lextra = get_le<std::uint16_t>(bytes, local + 28);
    const std::uint64_t start = local + 30 + lname + lextra;
    if (start > bytes.size() || csize > bytes.size() - start) throw DataError("archive entry '" + name + "' truncated");
    const std::string_view raw = bytes.substr(start, csize);
    std::string payload;
    if (method == 0) {
      if (csize != usize) throw DataError("stored entry '" + name + "' has inconsistent sizes");
      payload.assign(raw);
    } else if (method == 8) {
      if (usize > (std::uint64_t{1} << 40)) throw DataError("entry '" + name + "' too large");
      payload = inflate_raw(raw, usize);
    } else {
      throw DataError("unsupported compression method " + std::to_string(method) + " for '" + name + "'");
    }
    if (crc32_of(payload) != crc) throw DataError("CRC mismatch for archive entry '" + name + "'");

    std::string key = name;
    if (key.size() >= 4 && key.compare(key.size() - 4, 4, ".npy") == 0) key.resize(key.size() - 4);
    if (result.count(key)) throw DataError("duplicate archive entry '" + name + "'");
    try {
      result.emplace(key, decode(payload));
    } catch (const DataError& err) {
      throw DataError("entry '" + name + "': " + err.what());
    }
  }
  return result;
}

std::map<std::string, Array> load_npz(const std::filesystem::path& path) {
  try {
    return decode_npz(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_npz(const std::filesystem::path& path, const std::map<std::string, Array>& entries) {
  write_file(path, encode_npz(entries));
}

}  // namespace gridfuse::npy
