#include "mfeit/manifest.hpp"

#include <array>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "mfeit/errors.hpp"

namespace mfeit {

namespace fs = std::filesystem;

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx, buf.data(), static_cast<size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return os.str();
}

nlohmann::json read_manifest(const std::string& dir) {
  const fs::path p = fs::path(dir) / "manifest.json";
  if (!fs::exists(p)) return nlohmann::json::object();
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, "malformed manifest: " + std::string(e.what()));
  }
}

void write_manifest_stage(const std::string& dir, const std::string& stage,
                          const nlohmann::json& parameters,
                          const std::vector<ManifestEntry>& files) {
  nlohmann::json m = read_manifest(dir);
  nlohmann::json list = nlohmann::json::array();
  for (const auto& f : files) {
    list.push_back({{"path", f.path}, {"role", f.role}, {"sha256", f.sha256}});
  }
  m[stage] = {{"parameters", parameters}, {"files", list}};
  const fs::path p = fs::path(dir) / "manifest.json";
  std::ofstream out(p);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + p.string());
  out << m.dump(2) << "\n";
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + p.string());
}

std::vector<std::string> manifest_files(const std::string& dir, const std::string& stage,
                                        const std::string& role) {
  const nlohmann::json m = read_manifest(dir);
  if (!m.contains(stage)) throw Error(ErrorCode::kIo, "manifest has no " + stage + " stage");
  std::vector<std::string> out;
  for (const auto& f : m[stage]["files"]) {
    if (f["role"] != role) continue;
    const std::string path = (fs::path(dir) / f["path"].get<std::string>()).string();
    if (sha256_file(path) != f["sha256"].get<std::string>()) {
      throw Error(ErrorCode::kIo, "hash mismatch for " + path);
    }
    out.push_back(path);
  }
  return out;
}

}  // namespace mfeit
