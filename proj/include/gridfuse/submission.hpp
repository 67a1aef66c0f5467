#pragma once

#include "gridfuse/errors.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gridfuse {

// Raised for any archive that the leaderboard would reject.
class SubmissionError : public DataError {
 public:
  using DataError::DataError;
};

using ZoneLabels = std::map<std::string, std::vector<std::uint8_t>>;

// Zip container with one 1-D uint8 NPY entry "<zone>.npy" per zone, labels
// in the original point order. Valid labels: 0..classes-1 and 255.
std::string write_submission(const ZoneLabels& labels, const std::vector<std::string>& zones, int classes = 11);
ZoneLabels read_submission(const std::string& archive, const std::vector<std::string>& zones, int classes = 11);

void save_submission(const std::filesystem::path& path, const ZoneLabels& labels,
                     const std::vector<std::string>& zones, int classes = 11);
ZoneLabels load_submission(const std::filesystem::path& path, const std::vector<std::string>& zones,
                           int classes = 11);

}  // namespace gridfuse
