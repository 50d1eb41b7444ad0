// SPDX-License-Identifier: Apache-2.0
#include "avsr/data/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "avsr/core/error.hpp"
#include "avsr/data/formats.hpp"

namespace avsr::data {

namespace {

constexpr const char* kManifestMagic = "avsr-manifest";
constexpr int kManifestVersion = 1;

bool has_space(const std::string& s) {
  return s.empty() || s.find_first_of(" \t\r\n") != std::string::npos;
}

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw UsageError("unknown split '" + std::string(name) + "' (train, val or test)");
}

std::vector<const ClipRecord*> DatasetManifest::split(Split s) const {
  std::vector<const ClipRecord*> out;
  for (const auto& r : records) {
    if (r.split == s) out.push_back(&r);
  }
  return out;
}

std::size_t DatasetManifest::count(Split s) const {
  std::size_t n = 0;
  for (const auto& r : records) n += r.split == s;
  return n;
}

void DatasetManifest::validate() const {
  if (class_names.size() != extents.classes) {
    throw IngestionError("manifest names " + std::to_string(class_names.size()) +
                         " classes but declares " + std::to_string(extents.classes));
  }
  std::unordered_set<std::string> seen;
  std::vector<std::string> dup, bad_label;
  for (const auto& r : records) {
    if (!seen.insert(r.id).second) dup.push_back(r.id);
    if (r.label < 0 || static_cast<std::size_t>(r.label) >= extents.classes) bad_label.push_back(r.id);
  }
  if (!dup.empty()) throw IngestionError("duplicate clip ids: " + list_ids(dup));
  if (!bad_label.empty()) throw IngestionError("labels out of range: " + list_ids(bad_label));
}

void save_manifest(const DatasetManifest& m) {
  m.validate();
  const auto path = m.root / kManifestFile;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const auto& e = m.extents;
  out << kManifestMagic << ' ' << kManifestVersion << '\n';
  out << "extents " << e.timesteps << ' ' << e.height << ' ' << e.width << ' ' << e.audio_length << ' '
      << e.classes << ' ' << e.sample_rate << '\n';
  for (std::size_t c = 0; c < m.class_names.size(); ++c) {
    if (has_space(m.class_names[c])) throw FormatError("class name '" + m.class_names[c] + "' is not a single token");
    out << "class " << c << ' ' << m.class_names[c] << '\n';
  }
  for (const auto& r : m.records) {
    if (has_space(r.id) || has_space(r.stem)) throw FormatError("clip '" + r.id + "' is not a single token");
    out << "clip " << split_name(r.split) << ' ' << r.id << ' ' << r.stem << ' ' << r.label << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  const auto file = std::filesystem::is_directory(path) ? path / kManifestFile : path;
  std::ifstream in(file);
  if (!in) throw IoError("cannot read manifest " + file.string());
  DatasetManifest m;
  m.root = file.parent_path();
  std::string line;
  std::size_t lineno = 0;
  bool header = false, extents = false;
  const auto fail = [&](const std::string& why) {
    return FormatError(file.string() + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (!header) {
      int version = 0;
      if (kind != kManifestMagic || !(ls >> version)) throw fail("not a manifest");
      if (version != kManifestVersion) throw fail("unsupported manifest version " + std::to_string(version));
      header = true;
      continue;
    }
    if (kind == "extents") {
      auto& e = m.extents;
      if (!(ls >> e.timesteps >> e.height >> e.width >> e.audio_length >> e.classes >> e.sample_rate)) {
        throw fail("malformed extents");
      }
      extents = true;
    } else if (kind == "class") {
      std::size_t index = 0;
      std::string name;
      if (!(ls >> index >> name) || index != m.class_names.size()) throw fail("malformed class line");
      m.class_names.push_back(name);
    } else if (kind == "clip") {
      ClipRecord r;
      std::string split;
      if (!(ls >> split >> r.id >> r.stem >> r.label)) throw fail("malformed clip line");
      try {
        r.split = parse_split(split);
      } catch (const UsageError&) {
        throw fail("unknown split '" + split + "'");
      }
      m.records.push_back(std::move(r));
    } else {
      throw fail("unknown line kind '" + kind + "'");
    }
    std::string rest;
    if (ls >> rest) throw fail("trailing text");
  }
  if (!header || !extents) throw FormatError(file.string() + ": missing header or extents");
  try {
    m.validate();
  } catch (const IngestionError& e) {
    throw FormatError(file.string() + ": " + e.what());
  }
  return m;
}

ClipSet load_split(const DatasetManifest& m, Split split) {
  ClipSet set;
  set.split = split;
  set.extents = m.extents;
  const auto& e = m.extents;
  std::vector<std::string> bad;
  std::string first_reason;
  for (const ClipRecord* r : m.split(split)) {
    Clip clip;
    clip.id = r->id;
    clip.label = r->label;
    try {
      const auto stem = m.root / r->stem;
      FrameArray f = read_frames(stem.string() + ".frames");
      Waveform w = read_wav16(stem.string() + ".wav16k");
      if (f.timesteps != e.timesteps || f.height != e.height || f.width != e.width) {
        throw FormatError("frames are " + std::to_string(f.timesteps) + "x" + std::to_string(f.height) +
                          "x" + std::to_string(f.width));
      }
      if (w.sample_rate != e.sample_rate || w.samples.size() != e.audio_length) {
        throw FormatError("audio is " + std::to_string(w.samples.size()) + " samples at " +
                          std::to_string(w.sample_rate) + " Hz");
      }
      clip.frames = std::move(f.values);
      clip.waveform = std::move(w.samples);
    } catch (const Error& err) {
      if (bad.empty()) first_reason = err.what();
      bad.push_back(r->id);
      continue;
    }
    set.clips.push_back(std::move(clip));
  }
  if (!bad.empty()) {
    throw IngestionError(std::to_string(bad.size()) + " " + split_name(split) +
                         " clips failed to load: " + list_ids(bad) + " (first: " + first_reason + ")");
  }
  return set;
}

std::string list_ids(const std::vector<std::string>& ids, std::size_t shown) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < shown; ++i) {
    if (i) out += ", ";
    out += ids[i];
  }
  if (ids.size() > shown) out += " and " + std::to_string(ids.size() - shown) + " more";
  return out;
}

}  // namespace avsr::data
