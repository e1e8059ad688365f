#pragma once

#include <algorithm>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "demian/error.hpp"
#include "demian/ingestion.hpp"

namespace demian {

// Up to f_max uniformly spaced frame indices in [0, n_frames), always
// including the first and (for k >= 2) the last frame:
// index_i = floor(i * (n_frames - 1) / (k - 1)).
inline std::vector<int> sample_frames(int n_frames, int f_max) {
  if (n_frames < 1 || f_max < 1) throw ValidationError("sample_frames needs n_frames >= 1 and f_max >= 1");
  const int k = std::min(n_frames, f_max);
  std::vector<int> out(static_cast<std::size_t>(k));
  if (k == 1) {
    out[0] = 0;
    return out;
  }
  for (int i = 0; i < k; ++i) {
    out[static_cast<std::size_t>(i)] =
        static_cast<int>(static_cast<long long>(i) * (n_frames - 1) / (k - 1));
  }
  return out;
}

// Resolves segment-relative frame indices to references the VLM transport can
// carry (URLs, data URIs, or opaque ids for the mock).
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::vector<std::string> resolve(const Segment& seg, std::span<const int> indices) const = 0;
};

// Emits "<episode_id>/frame_<absolute index, 6 digits>" without touching pixels.
class StubFrameSource final : public FrameSource {
 public:
  std::vector<std::string> resolve(const Segment& seg, std::span<const int> indices) const override {
    std::vector<std::string> out;
    out.reserve(indices.size());
    for (int i : indices) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "/frame_%06d", seg.start_frame + i);
      out.push_back(seg.episode_id + buf);
    }
    return out;
  }
};

}  // namespace demian
