#include "gridfuse/submission.hpp"

#include "gridfuse/npy.hpp"

#include <set>

namespace gridfuse {

namespace {

void check_labels(const std::string& zone, std::span<const std::uint8_t> labels, int classes) {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= classes && labels[i] != 255)
      throw SubmissionError("zone '" + zone + "': label " + std::to_string(labels[i]) + " at index " +
                            std::to_string(i) + " is outside 0.." + std::to_string(classes - 1) + " and 255");
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

void check_zone_set(const std::set<std::string>& present, const std::vector<std::string>& zones) {
  const std::set<std::string> expected(zones.begin(), zones.end());
  std::vector<std::string> missing, unexpected;
  for (const auto& z : expected)
    if (!present.count(z)) missing.push_back(z);
  for (const auto& z : present)
    if (!expected.count(z)) unexpected.push_back(z);
  std::string msg;
  if (!missing.empty()) msg += "missing zones: " + join(missing);
  if (!unexpected.empty()) msg += std::string(msg.empty() ? "" : "; ") + "unexpected zones: " + join(unexpected);
  if (!msg.empty()) throw SubmissionError(msg);
}

}  // namespace

std::string write_submission(const ZoneLabels& labels, const std::vector<std::string>& zones, int classes) {
  std::set<std::string> present;
  for (const auto& [zone, _] : labels) present.insert(zone);
  check_zone_set(present, zones);
  std::map<std::string, npy::Array> entries;
  for (const auto& [zone, values] : labels) {
    check_labels(zone, values, classes);
    entries.emplace(zone, npy::make_array<std::uint8_t>(values, {values.size()}));
  }
  return npy::encode_npz(entries);
}

ZoneLabels read_submission(const std::string& archive, const std::vector<std::string>& zones, int classes) {
  std::map<std::string, npy::Array> entries;
  try {
    entries = npy::decode_npz(archive);
  } catch (const SubmissionError&) {
    throw;
  } catch (const DataError& e) {
    throw SubmissionError(std::string("corrupt submission archive: ") + e.what());
  }
  std::set<std::string> present;
  for (const auto& [zone, _] : entries) present.insert(zone);
  check_zone_set(present, zones);

  ZoneLabels out;
  for (auto& [zone, a] : entries) {
    if (a.dtype != npy::DType::UInt8)
      throw SubmissionError("zone '" + zone + "': dtype " + npy::dtype_descr(a.dtype) + " found, expected |u1 (uint8)");
    if (a.shape.size() != 1)
      throw SubmissionError("zone '" + zone + "': array must be 1-D, found " + std::to_string(a.shape.size()) +
                            " dimensions");
    auto values = a.to_vector<std::uint8_t>();
    check_labels(zone, values, classes);
    out.emplace(zone, std::move(values));
  }
  return out;
}

void save_submission(const std::filesystem::path& path, const ZoneLabels& labels,
                     const std::vector<std::string>& zones, int classes) {
  npy::write_file(path, write_submission(labels, zones, classes));
}

ZoneLabels load_submission(const std::filesystem::path& path, const std::vector<std::string>& zones, int classes) {
  return read_submission(npy::read_file(path), zones, classes);
}

}  // namespace gridfuse
