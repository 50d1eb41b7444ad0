// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace avsr::data {

enum class Split { kTrain, kVal, kTest };

const char* split_name(Split s);
/// UsageError for anything but train, val or test.
Split parse_split(std::string_view name);

/// Declared per-clip extents of a dataset.
struct Extents {
  std::size_t timesteps = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t audio_length = 0;
  std::size_t classes = 0;
  std::uint32_t sample_rate = 16000;

  std::size_t frame_values() const { return timesteps * height * width; }
  bool operator==(const Extents&) const = default;
};

/// One decoded clip. frames is [T,H,W] row-major in [0,1]; waveform is [L].
struct Clip {
  std::string id;
  int label = 0;
  std::vector<float> frames;
  std::vector<float> waveform;
};

struct ClipRecord {
  Split split = Split::kTrain;
  std::string id;
  /// Path of the clip's files relative to the dataset root, without the
  /// .frames / .wav16k extension.
  std::string stem;
  int label = 0;
};

/// Index of a dataset on disk. Immutable once built.
struct DatasetManifest {
  std::filesystem::path root;
  Extents extents;
  std::vector<std::string> class_names;
  std::vector<ClipRecord> records;

  std::vector<const ClipRecord*> split(Split s) const;
  std::size_t count(Split s) const;

  /// IngestionError on duplicate ids, labels out of range or a class-name
  /// count that disagrees with the extents.
  void validate() const;
};

inline constexpr const char* kManifestFile = "manifest.txt";

/// Line-oriented manifest: a version line, an extents line, one line per
/// class and one per clip. Writes `root/manifest.txt`.
void save_manifest(const DatasetManifest& manifest);
/// Reads `path` (a manifest file or a directory holding one). FormatError
/// on malformed lines, IoError when unreadable.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Decoded clips of one split, in manifest order.
struct ClipSet {
  Split split = Split::kTrain;
  Extents extents;
  std::vector<Clip> clips;

  std::size_t size() const { return clips.size(); }
  bool empty() const { return clips.empty(); }
};

/// Decodes every clip of `split`. IngestionError listing the ids whose files
/// are missing, undecodable or of the wrong extents.
ClipSet load_split(const DatasetManifest& manifest, Split split);

/// Builds "a, b, c and 4 more" style lists for error messages.
std::string list_ids(const std::vector<std::string>& ids, std::size_t shown = 8);

}  // namespace avsr::data
