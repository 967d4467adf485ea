#include "adcare/cli/manifest.h"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"

#include "adcare/data/synthetic.h"
#include "adcare/error.h"

namespace adcare::cli {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string digest(const fs::path& path) {
  if (fs::is_regular_file(path)) return sha256_hex(data::read_text(path));
  if (!fs::is_directory(path)) return "";
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(path))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), path).generic_string());
  std::ranges::sort(files);
  std::string listing;
  for (const auto& f : files) listing += f + '\0' + sha256_hex(data::read_text(path / f)) + '\n';
  return sha256_hex(listing);
}

std::string git_describe() {
  FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r");
  if (!pipe) return "unknown";
  std::string out;
  char buf[256];
  while (fgets(buf, sizeof buf, pipe)) out += buf;
  const int status = pclose(pipe);
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return status == 0 && !out.empty() ? out : "unknown";
}

void append_manifest(const fs::path& out_dir, const RunManifest& m) {
  fs::create_directories(out_dir);
  const auto path = out_dir / "manifests.jsonl";
  std::string previous;
  if (fs::exists(path)) {
    const auto text = data::read_text(path);
    const auto end = text.find_last_not_of('\n');
    if (end != std::string::npos) {
      auto start = text.rfind('\n', end);
      start = start == std::string::npos ? 0 : start + 1;
      previous = text.substr(start, end + 1 - start);
    }
  }
  nlohmann::ordered_json line{{"command", m.command},
                              {"config", m.config_path},
                              {"seed", m.seed},
                              {"git_describe", m.git_describe},
                              {"inputs", m.inputs},
                              {"outputs", m.outputs},
                              {"parent", previous.empty() ? nlohmann::ordered_json(nullptr)
                                                          : nlohmann::ordered_json(sha256_hex(previous))},
                              {"wall_clock_seconds", m.wall_clock_seconds},
                              {"exit_status", m.exit_status}};
  if (!m.error.empty()) line["error"] = m.error;
  std::ofstream f(path, std::ios::app | std::ios::binary);
  if (!f) throw IoError("cannot append to " + path.string());
  f << line.dump() << '\n';
  if (!f) throw IoError("cannot append to " + path.string());
}

}  // namespace adcare::cli
