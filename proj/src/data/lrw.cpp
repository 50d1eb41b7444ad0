// SPDX-License-Identifier: Apache-2.0
#include "avsr/data/lrw.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <system_error>

#include "avsr/core/error.hpp"
#include "avsr/data/formats.hpp"

namespace avsr::data {

namespace fs = std::filesystem;

namespace {

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  std::error_code ec;
  for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
    if (it->is_directory() == directories) out.push_back(it->path());
  }
  if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

DatasetManifest load_lrw_layout(const fs::path& root, const LayoutExpectations& expect) {
  if (!fs::is_directory(root)) throw IoError(root.string() + " is not a directory");
  DatasetManifest m;
  m.root = root;
  m.extents.timesteps = expect.timesteps;
  m.extents.sample_rate = expect.sample_rate;
  m.extents.audio_length = expect.audio_length;

  std::vector<std::string> offending;
  std::string first_reason;
  auto reject = [&](const std::string& id, const std::string& why) {
    if (offending.empty()) first_reason = id + ": " + why;
    offending.push_back(id);
  };
  std::set<std::string> ids;
  std::optional<std::pair<std::size_t, std::size_t>> frame_size;
  std::optional<std::size_t> audio_length;
  if (expect.audio_length) audio_length = expect.audio_length;

  for (const fs::path& word_dir : sorted_entries(root, true)) {
    const int label = static_cast<int>(m.class_names.size());
    m.class_names.push_back(word_dir.filename().string());
    for (Split split : {Split::kTrain, Split::kVal, Split::kTest}) {
      const fs::path dir = word_dir / split_name(split);
      if (!fs::is_directory(dir)) continue;
      std::map<std::string, int> stems;  // bit 1: frames, bit 2: audio
      for (const fs::path& f : sorted_entries(dir, false)) {
        const auto ext = f.extension().string();
        if (ext == ".frames") stems[f.stem().string()] |= 1;
        else if (ext == ".wav16k") stems[f.stem().string()] |= 2;
      }
      for (const auto& [stem, have] : stems) {
        if (!ids.insert(stem).second) {
          reject(stem, "id appears more than once");
          continue;
        }
        if (have != 3) {
          reject(stem, have == 1 ? "audio file missing" : "frame file missing");
          continue;
        }
        const fs::path base = dir / stem;
        try {
          const FrameArray f = read_frames(base.string() + ".frames");
          const Waveform w = read_wav16(base.string() + ".wav16k");
          if (f.timesteps != expect.timesteps) {
            throw FormatError(std::to_string(f.timesteps) + " frames, expected " +
                              std::to_string(expect.timesteps));
          }
          if (!frame_size) frame_size = {f.height, f.width};
          if (std::pair{f.height, f.width} != *frame_size) {
            throw FormatError("frames are " + std::to_string(f.height) + "x" + std::to_string(f.width) +
                              ", earlier clips are " + std::to_string(frame_size->first) + "x" +
                              std::to_string(frame_size->second));
          }
          if (w.sample_rate != expect.sample_rate) {
            throw FormatError("audio at " + std::to_string(w.sample_rate) + " Hz, expected " +
                              std::to_string(expect.sample_rate));
          }
          if (!audio_length) audio_length = w.samples.size();
          if (w.samples.size() != *audio_length) {
            throw FormatError(std::to_string(w.samples.size()) + " audio samples, expected " +
                              std::to_string(*audio_length));
          }
        } catch (const Error& e) {
          reject(stem, e.what());
          continue;
        }
        const auto rel = fs::relative(base, root).generic_string();
        m.records.push_back(ClipRecord{split, stem, rel, label});
      }
    }
  }
  if (!offending.empty()) {
    throw IngestionError(std::to_string(offending.size()) + " clips rejected: " + list_ids(offending) +
                         " (first: " + first_reason + ")");
  }
  if (m.class_names.empty()) throw EmptyDatasetError(root.string() + " holds no word directories");
  m.extents.classes = m.class_names.size();
  if (frame_size) {
    m.extents.height = frame_size->first;
    m.extents.width = frame_size->second;
  }
  m.extents.audio_length = audio_length.value_or(0);
  m.validate();
  return m;
}

std::vector<float> extract_mouth_roi(std::span<const float> frame, std::size_t height,
                                     std::size_t width, const Rect& rect) {
  if (frame.size() != height * width) {
    throw SizeError("frame holds " + std::to_string(frame.size()) + " values, expected " +
                    std::to_string(height) + "x" + std::to_string(width));
  }
  if (rect.height == 0 || rect.width == 0 || rect.top + rect.height > height ||
      rect.left + rect.width > width) {
    throw BoundsError("rectangle " + std::to_string(rect.height) + "x" + std::to_string(rect.width) +
                      " at (" + std::to_string(rect.top) + "," + std::to_string(rect.left) +
                      ") does not fit a " + std::to_string(height) + "x" + std::to_string(width) + " frame");
  }
  std::vector<float> out;
  out.reserve(rect.height * rect.width);
  for (std::size_t y = 0; y < rect.height; ++y) {
    const auto row = frame.begin() + static_cast<std::ptrdiff_t>((rect.top + y) * width + rect.left);
    out.insert(out.end(), row, row + static_cast<std::ptrdiff_t>(rect.width));
  }
  return out;
}

std::vector<float> extract_mouth_roi_clip(std::span<const float> frames, std::size_t timesteps,
                                          std::size_t height, std::size_t width, const Rect& rect) {
  if (frames.size() != timesteps * height * width) {
    throw SizeError("clip holds " + std::to_string(frames.size()) + " values, expected " +
                    std::to_string(timesteps) + "x" + std::to_string(height) + "x" + std::to_string(width));
  }
  std::vector<float> out;
  out.reserve(timesteps * rect.height * rect.width);
  for (std::size_t t = 0; t < timesteps; ++t) {
    const auto roi = extract_mouth_roi(frames.subspan(t * height * width, height * width), height, width, rect);
    out.insert(out.end(), roi.begin(), roi.end());
  }
  return out;
}

}  // namespace avsr::data
