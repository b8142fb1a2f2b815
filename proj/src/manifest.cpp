#include "cannibal/manifest.hpp"

#include <array>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "cannibal/errors.hpp"

namespace cannibal {

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xf];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), {}};
  return sha256_hex(bytes);
}

std::string RunManifest::run_id() const {
  std::string key = command + '\n' + config_hash + '\n' + std::to_string(seed);
  for (const FileDigest& d : inputs) key += '\n' + d.name + '=' + d.sha256;
  return sha256_hex(key).substr(0, 16);
}

std::string RunManifest::to_json() const {
  const auto list = [](const std::vector<FileDigest>& files) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const FileDigest& f : files) {
      arr.push_back({{"path", f.name}, {"sha256", f.sha256}});
    }
    return arr;
  };
  nlohmann::ordered_json j;
  j["run_id"] = run_id();
  j["command"] = command;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["inputs"] = list(inputs);
  j["artifacts"] = list(artifacts);
  j["timing"] = {{"elapsed_seconds", elapsed_seconds}};
  return j.dump(2);
}

}  // namespace cannibal
