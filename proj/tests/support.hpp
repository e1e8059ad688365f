#pragma once

// Shared fixtures for the unit suites: source-tree paths, scratch
// directories, and seeded input generators.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "demian/ingestion.hpp"
#include "demian/rng.hpp"

namespace demian::test {

inline std::filesystem::path source_path(const std::string& rel) {
  return std::filesystem::path(DEMIAN_SOURCE_DIR) / rel;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    const auto stamp = mix64(reinterpret_cast<std::uintptr_t>(this) ^ ++counter);
    path_ = std::filesystem::temp_directory_path() /
            ("demian-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(stamp % 1000000));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

// Random well-formed episode with ordered, non-overlapping spans.
inline EpisodeMeta random_episode(Rng& rng, const std::string& id, Dataset dataset = Dataset::robocasa365) {
  EpisodeMeta ep;
  ep.episode_id = id;
  ep.dataset = dataset;
  ep.frame_count = uniform_int(rng, 1, 400);
  ep.task_label = "Task " + std::to_string(uniform_int(rng, 0, 9));
  ep.scene_descriptor = rng.uniform() < 0.5 ? "" : "kitchen " + std::to_string(uniform_int(rng, 0, 50));
  for (int i = 0, n = uniform_int(rng, 0, 3); i < n; ++i) ep.object_list.push_back("obj" + std::to_string(i));
  int cursor = 0;
  const int n_spans = uniform_int(rng, 0, 5);
  for (int i = 0; i < n_spans && cursor < ep.frame_count; ++i) {
    const int start = uniform_int(rng, cursor, ep.frame_count - 1);
    const int end = uniform_int(rng, start + 1, ep.frame_count);
    ep.primitive_spans.push_back({"prim-" + std::to_string(i), start, end});
    cursor = end;
  }
  return ep;
}

}  // namespace demian::test
