// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mvact/demo_data.hpp"

namespace mvact::demo {

inline constexpr int kDatasetSchemaVersion = 1;
inline constexpr std::uint32_t kSampleMagic = 0x3153564dU;  // "MVS1"

struct DatasetInfo {
  int horizon = 5;
  std::uint64_t seed = 0;
  std::vector<std::string> tasks;
  /// Free-form creation stamp; the only non-deterministic manifest field.
  std::string created;
};

struct Dataset {
  DatasetInfo info;
  std::vector<TrainingSample> samples;
};

/// Writes `dir/manifest.txt` plus one `dir/samples/NNNNNN.bin` per sample.
/// Record layout is documented in docs/FORMATS.md.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);

/// Throws Errc::malformed_manifest, Errc::version_mismatch or
/// Errc::truncated_record for the corresponding corruptions.
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace mvact::demo
