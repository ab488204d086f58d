#include "artifacts.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "ovma/errors.hpp"

#ifndef OVMA_VERSION
#define OVMA_VERSION "0.0.0"
#endif

namespace ovma::cli {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

void write_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + tmp.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

ArtifactDir::ArtifactDir(fs::path root) : root_(std::move(root)) {
  if (enabled()) fs::create_directories(root_);
}

void ArtifactDir::write(const std::string& relpath, const std::string& bytes) {
  if (!enabled()) return;
  write_atomic(root_ / relpath, bytes);
  names_.push_back(relpath);
  sums_.push_back(sha256_hex(bytes));
}

void ArtifactDir::write_json(const std::string& relpath, const nlohmann::ordered_json& j) {
  write(relpath, j.dump(2) + "\n");
}

void ArtifactDir::write_manifest(const nlohmann::ordered_json& config) {
  if (!enabled()) return;
  nlohmann::ordered_json m;
  m["config"] = config;
  m["artifacts"] = names_;
  nlohmann::ordered_json sums = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < names_.size(); ++i) sums[names_[i]] = sums_[i];
  m["checksums"] = sums;
  m["version"] = OVMA_VERSION;
  write_atomic(root_ / "manifest.json", m.dump(2) + "\n");
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace ovma::cli
