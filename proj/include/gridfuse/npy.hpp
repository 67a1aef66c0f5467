#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace gridfuse::npy {

enum class DType { Float32, Float64, UInt8, Int32, Int64 };

std::size_t dtype_size(DType t);
// NumPy descr string, e.g. "<f4" or "|u1".
std::string dtype_descr(DType t);

// A C-ordered little-endian array held as raw bytes.
struct Array {
  DType dtype = DType::Float32;
  std::vector<std::size_t> shape;
  std::vector<std::byte> data;

  std::size_t element_count() const;

  template <typename T>
  std::vector<T> to_vector() const;
};

template <typename T>
DType dtype_of();
template <> inline DType dtype_of<float>() { return DType::Float32; }
template <> inline DType dtype_of<double>() { return DType::Float64; }
template <> inline DType dtype_of<std::uint8_t>() { return DType::UInt8; }
template <> inline DType dtype_of<std::int32_t>() { return DType::Int32; }
template <> inline DType dtype_of<std::int64_t>() { return DType::Int64; }

template <typename T>
Array make_array(std::span<const T> values, std::vector<std::size_t> shape);

// NPY version 1.0 container. The header is padded so the payload starts on a
// 64-byte boundary.
std::string encode(const Array& a);
// Accepts NPY versions 1.0, 2.0 and 3.0, little-endian or byte-order-free
// dtypes, C order only. Throws DataError on anything else.
Array decode(std::string_view bytes);

Array load(const std::filesystem::path& path);
void save(const std::filesystem::path& path, const Array& a);

// NPZ: zip archive of NPY entries named "<key>.npy". Entries are written
// uncompressed (stored); stored and deflated entries are both readable.
std::string encode_npz(const std::map<std::string, Array>& entries);
std::map<std::string, Array> decode_npz(std::string_view bytes);

std::map<std::string, Array> load_npz(const std::filesystem::path& path);
void save_npz(const std::filesystem::path& path, const std::map<std::string, Array>& entries);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

// Converts any numeric dtype to T (with a range check for integer targets).
template <typename T>
std::vector<T> convert(const Array& a);

}  // namespace gridfuse::npy
