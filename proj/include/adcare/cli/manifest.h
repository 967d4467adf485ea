#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace adcare::cli {

std::string sha256_hex(std::string_view bytes);

/// Content digest of a file, or of a directory tree (relative path and file
/// digest of every regular file, in sorted order). Missing paths hash to "".
std::string digest(const std::filesystem::path& path);

// `git describe --always --dirty` of the working directory, or "unknown".
std::string git_describe();

struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string git_describe;
  std::map<std::string, std::string> inputs;   // path -> digest
  std::map<std::string, std::string> outputs;  // path -> digest
  double wall_clock_seconds = 0.0;
  int exit_status = 0;
  std::string error;
};

/// Appends one JSON line to <out>/manifests.jsonl. Each line carries the
/// digest of the line before it, so the file forms a hash chain.
void append_manifest(const std::filesystem::path& out_dir, const RunManifest& manifest);

}  // namespace adcare::cli
