#ifndef CANNIBAL_MANIFEST_HPP
#define CANNIBAL_MANIFEST_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cannibal {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

struct FileDigest {
  std::string name;
  std::string sha256;
};

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<FileDigest> inputs;
  // Paths relative to the output directory.
  std::vector<FileDigest> artifacts;
  double elapsed_seconds = 0.0;

  /// First 16 hex digits of a digest over command, config hash, seed and
  /// input digests. Independent of timing and artifacts.
  std::string run_id() const;
  std::string to_json() const;
};

}  // namespace cannibal

#endif  // CANNIBAL_MANIFEST_HPP
