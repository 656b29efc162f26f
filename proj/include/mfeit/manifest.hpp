#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace mfeit {

/// Lowercase hex SHA-256 of a file's bytes. Throws Io when unreadable.
std::string sha256_file(const std::string& path);

struct ManifestEntry {
  std::string path;  // relative to the output directory
  std::string role;
  std::string sha256;
};

/// Records one stage of a run in <dir>/manifest.json, keeping the entries
/// of other stages already present.
void write_manifest_stage(const std::string& dir, const std::string& stage,
                          const nlohmann::json& parameters,
                          const std::vector<ManifestEntry>& files);

/// The manifest of a directory, or an empty object if none exists.
nlohmann::json read_manifest(const std::string& dir);

/// Files of one stage with the given role, as paths joined to dir. Throws Io
/// if the stage is missing or a file no longer matches its recorded hash.
std::vector<std::string> manifest_files(const std::string& dir, const std::string& stage,
                                        const std::string& role);

}  // namespace mfeit
