#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "rankformer/types.hpp"

namespace rankformer {

// Embedding checkpoint: 16-byte header ("RKF1", u32 n, u32 m, u32 d, all
// little-endian) followed by n+m rows of d little-endian float32 values.
// A plain-text key=value manifest sits next to it at <path>.manifest.

struct Checkpoint {
  Mat z;
  Index n = 0, m = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Mat& z, Index n, Index m,
                     const std::map<std::string, std::string>& manifest = {});

Checkpoint load_checkpoint(const std::filesystem::path& path);

std::map<std::string, std::string> load_manifest(const std::filesystem::path& checkpoint_path);

}  // namespace rankformer
