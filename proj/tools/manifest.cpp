#include "manifest.hpp"

#include "gridfuse/npy.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <memory>
#include <stdexcept>

namespace gridfuse::cli {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw std::runtime_error("SHA-256 computation failed");
  std::string hex;
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(npy::read_file(path)); }

Manifest::Manifest(std::string command) {
  doc_["tool"] = "gridfuse";
  doc_["version"] = GRIDFUSE_VERSION;
  doc_["command"] = std::move(command);
  doc_["parameters"] = nlohmann::ordered_json::object();
  doc_["results"] = nlohmann::ordered_json::object();
}

void Manifest::input(const fs::path& path) { inputs_.push_back(path); }
void Manifest::output(const fs::path& path) { outputs_.push_back(path); }

namespace {

nlohmann::ordered_json digests(const std::vector<fs::path>& paths) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file()) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) out[f.string()] = sha256_file(f);
    } else {
      out[p.string()] = sha256_file(p);
    }
  }
  return out;
}

}  // namespace

void Manifest::write(const fs::path& primary) {
  doc_["inputs"] = digests(inputs_);
  doc_["outputs"] = digests(outputs_);
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  doc_["created"] = stamp;
  fs::path target = primary;
  target += ".manifest.json";
  npy::write_file(target, doc_.dump(2) + "\n");
}

}  // namespace gridfuse::cli
