#pragma once

// Output directory bookkeeping: atomic file writes, SHA-256 checksums and
// the run manifest.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace ovma::cli {

std::string sha256_hex(const std::string& bytes);

/// Writes to <path>.tmp then renames over path.
void write_atomic(const std::filesystem::path& path, const std::string& bytes);

class ArtifactDir {
 public:
  /// Empty root disables file output; every write becomes a no-op.
  explicit ArtifactDir(std::filesystem::path root);

  bool enabled() const { return !root_.empty(); }
  const std::filesystem::path& root() const { return root_; }

  void write(const std::string& relpath, const std::string& bytes);
  void write_json(const std::string& relpath, const nlohmann::ordered_json& j);

  /// manifest.json with config, artifacts, checksums and version.
  void write_manifest(const nlohmann::ordered_json& config);

 private:
  std::filesystem::path root_;
  std::vector<std::string> names_;
  std::vector<std::string> sums_;
};

/// %.17g, or "nan"/"inf" for non-finite values.
std::string fmt(double v);

}  // namespace ovma::cli
