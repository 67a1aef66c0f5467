// Run manifest written next to every output artifact.
#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace gridfuse::cli {

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

class Manifest {
 public:
  explicit Manifest(std::string command);

  nlohmann::ordered_json& parameters() { return doc_["parameters"]; }
  nlohmann::ordered_json& results() { return doc_["results"]; }
  // Files are digested when write() runs; a directory contributes every
  // regular file inside it, sorted by name.
  void input(const std::filesystem::path& path);
  void output(const std::filesystem::path& path);

  // <primary>.manifest.json
  void write(const std::filesystem::path& primary);

 private:
  nlohmann::ordered_json doc_;
  std::vector<std::filesystem::path> inputs_, outputs_;
};

}  // namespace gridfuse::cli
