// kws/dataset.cc

// Copyright 2026  The KWS Engine Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "kws/dataset.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace kws {

namespace fs = std::filesystem;

namespace {

constexpr char kBackgroundDir[] = "_background_noise_";
constexpr char kUnknownName[] = "unknown";

std::set<std::string> read_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("missing split list: " + path);
  }
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n' ||
                             line.back() == ' ')) {
      line.pop_back();
    }
    if (!line.empty()) out.insert(line);
  }
  return out;
}

bool has_wav_suffix(const std::string& name) {
  return name.size() > 4 && name.compare(name.size() - 4, 4, ".wav") == 0;
}

std::vector<std::string> sorted_entries(const fs::path& dir, bool dirs_only) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const bool is_dir = entry.is_directory();
    if (dirs_only != is_dir) continue;
    names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::string word_of(const std::string& rel_path) {
  const size_t slash = rel_path.find('/');
  return slash == std::string::npos ? rel_path : rel_path.substr(0, slash);
}

}  // namespace

const std::vector<std::string>& gsc_keywords() {
  static const std::vector<std::string> kWords = {
      "up", "down", "left", "right", "yes", "no", "on", "off", "go", "stop"};
  return kWords;
}

DatasetManifest ingest_gsc(const std::string& dataset_dir) {
  const fs::path root(dataset_dir);
  if (!fs::is_directory(root)) {
    throw IoError("dataset directory not found: " + dataset_dir);
  }
  const std::set<std::string> valid_set =
      read_list_file((root / "validation_list.txt").string());
  const std::set<std::string> test_set =
      read_list_file((root / "testing_list.txt").string());

  DatasetManifest m;
  m.class_names = gsc_keywords();
  m.class_names.push_back(kUnknownName);
  const int unknown_label = static_cast<int>(m.class_names.size()) - 1;

  std::map<std::string, int> label_of;
  for (size_t i = 0; i < gsc_keywords().size(); ++i) {
    label_of[gsc_keywords()[i]] = static_cast<int>(i);
  }

  for (const std::string& word : sorted_entries(root, /*dirs_only=*/true)) {
    if (word == kBackgroundDir) continue;
    const auto it = label_of.find(word);
    const int label = it == label_of.end() ? unknown_label : it->second;
    for (const std::string& file :
         sorted_entries(root / word, /*dirs_only=*/false)) {
      if (!has_wav_suffix(file)) continue;
      const std::string rel = word + "/" + file;
      try {
        (void)read_wav((root / rel).string());
      } catch (const Error&) {
        m.rejects.push_back(rel);
        continue;
      }
      ManifestEntry entry{rel, label, -1};
      if (test_set.count(rel)) {
        m.test.push_back(entry);
      } else if (valid_set.count(rel)) {
        m.valid.push_back(entry);
      } else {
        m.train.push_back(entry);
      }
    }
  }

  // Background recordings become one-second training slices labeled unknown.
  const fs::path noise_dir = root / kBackgroundDir;
  if (fs::is_directory(noise_dir)) {
    for (const std::string& file :
         sorted_entries(noise_dir, /*dirs_only=*/false)) {
      if (!has_wav_suffix(file)) continue;
      const std::string rel = std::string(kBackgroundDir) + "/" + file;
      AudioClip clip;
      try {
        clip = read_wav((root / rel).string());
      } catch (const Error&) {
        m.rejects.push_back(rel);
        continue;
      }
      const int64_t slices =
          static_cast<int64_t>(clip.samples.size()) / kSampleRate;
      for (int64_t s = 0; s < slices; ++s) {
        m.train.push_back(ManifestEntry{rel, unknown_label, s * kSampleRate});
      }
    }
  }

  // Canonical order, so example ids are a function of the content alone and
  // not of the gathering order above.
  auto by_path = [](const ManifestEntry& a, const ManifestEntry& b) {
    return a.rel_path != b.rel_path ? a.rel_path < b.rel_path
                                    : a.start_sample < b.start_sample;
  };
  std::sort(m.train.begin(), m.train.end(), by_path);
  std::sort(m.valid.begin(), m.valid.end(), by_path);
  std::sort(m.test.begin(), m.test.end(), by_path);
  std::sort(m.rejects.begin(), m.rejects.end());
  return m;
}

DatasetManifest restrict_manifest(const DatasetManifest& manifest,
                                  const std::vector<std::string>& keywords,
                                  const std::vector<std::string>& unknown_words,
                                  int max_train_clips) {
  KWS_CHECK(!keywords.empty(), "restrict_manifest: no keywords given");
  std::map<std::string, int> new_label;
  for (size_t i = 0; i < keywords.size(); ++i) {
    for (size_t j = 0; j < i; ++j) {
      KWS_CHECK(keywords[i] != keywords[j],
                "restrict_manifest: duplicate keyword " << keywords[i]);
    }
    new_label[keywords[i]] = static_cast<int>(i);
  }
  const int unknown_label = static_cast<int>(keywords.size());
  for (const std::string& w : unknown_words) {
    KWS_CHECK(!new_label.count(w),
              "restrict_manifest: " << w << " is both keyword and unknown");
    new_label[w] = unknown_label;
  }

  DatasetManifest out;
  out.class_names = keywords;
  out.class_names.push_back(kUnknownName);
  out.rejects = manifest.rejects;

  auto relabel = [&](const std::vector<ManifestEntry>& in) {
    std::vector<ManifestEntry> kept;
    for (const ManifestEntry& e : in) {
      const auto it = new_label.find(word_of(e.rel_path));
      if (it == new_label.end()) continue;
      ManifestEntry copy = e;
      copy.label = it->second;
      kept.push_back(copy);
    }
    return kept;
  };
  out.train = relabel(manifest.train);
  out.valid = relabel(manifest.valid);
  out.test = relabel(manifest.test);

  if (max_train_clips > 0 &&
      static_cast<int>(out.train.size()) > max_train_clips) {
    // Round-robin across classes so the cap keeps the class balance.
    std::vector<std::vector<ManifestEntry>> by_class(
        out.class_names.size());
    for (const ManifestEntry& e : out.train) {
      by_class[static_cast<size_t>(e.label)].push_back(e);
    }
    std::vector<ManifestEntry> capped;
    capped.reserve(static_cast<size_t>(max_train_clips));
    size_t round = 0;
    while (static_cast<int>(capped.size()) < max_train_clips) {
      bool any = false;
      for (const auto& cls : by_class) {
        if (round < cls.size()) {
          any = true;
          capped.push_back(cls[round]);
          if (static_cast<int>(capped.size()) == max_train_clips) break;
        }
      }
      if (!any) break;
      ++round;
    }
    out.train = std::move(capped);
  }
  return out;
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["class_names"] = manifest.class_names;
  auto dump_split = [](const std::vector<ManifestEntry>& split) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const ManifestEntry& e : split) {
      nlohmann::ordered_json je;
      je["path"] = e.rel_path;
      je["label"] = e.label;
      je["start"] = e.start_sample;
      arr.push_back(je);
    }
    return arr;
  };
  j["train"] = dump_split(manifest.train);
  j["valid"] = dump_split(manifest.valid);
  j["test"] = dump_split(manifest.test);
  j["rejects"] = manifest.rejects;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path + ": " + e.what());
  }
  DatasetManifest m;
  try {
    if (j.at("version").get<int>() != 1) {
      throw FormatError("manifest " + path + ": unsupported version");
    }
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    auto read_split = [&](const char* key) {
      std::vector<ManifestEntry> split;
      for (const auto& je : j.at(key)) {
        ManifestEntry e;
        e.rel_path = je.at("path").get<std::string>();
        e.label = je.at("label").get<int>();
        e.start_sample = je.at("start").get<int64_t>();
        if (e.label < 0 ||
            e.label >= static_cast<int>(m.class_names.size())) {
          throw FormatError("manifest " + path + ": label out of range for " +
                            e.rel_path);
        }
        split.push_back(e);
      }
      return split;
    };
    m.train = read_split("train");
    m.valid = read_split("valid");
    m.test = read_split("test");
    if (j.contains("rejects")) {
      m.rejects = j.at("rejects").get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path + ": " + e.what());
  }
  return m;
}

std::vector<LoadedExample> load_split(const DatasetManifest& manifest,
                                      const std::string& split,
                                      const std::string& dataset_dir) {
  const std::vector<ManifestEntry>* entries = nullptr;
  if (split == "train") {
    entries = &manifest.train;
  } else if (split == "valid") {
    entries = &manifest.valid;
  } else if (split == "test") {
    entries = &manifest.test;
  } else {
    throw ConfigError("unknown split: " + split);
  }

  const fs::path root(dataset_dir);
  std::vector<LoadedExample> out(entries->size());
  parallel_for(static_cast<int64_t>(entries->size()), [&](int64_t i) {
    const ManifestEntry& e = (*entries)[static_cast<size_t>(i)];
    AudioClip clip = read_wav((root / e.rel_path).string());
    LoadedExample& ex = out[static_cast<size_t>(i)];
    if (e.start_sample >= 0) {
      const int64_t lo = e.start_sample;
      const int64_t hi =
          std::min<int64_t>(lo + kSampleRate,
                            static_cast<int64_t>(clip.samples.size()));
      if (lo >= hi) {
        throw FormatError("slice start " + std::to_string(lo) +
                          " beyond end of " + e.rel_path);
      }
      AudioClip slice;
      slice.sample_rate = clip.sample_rate;
      slice.samples.assign(clip.samples.begin() + lo,
                           clip.samples.begin() + hi);
      ex.clip = std::move(slice);
      ex.utterance_id =
          e.rel_path + ":" + std::to_string(e.start_sample);
    } else {
      ex.clip = std::move(clip);
      ex.utterance_id = e.rel_path;
    }
    ex.label = e.label;
    ex.example_id = i;
  });
  return out;
}

std::vector<AudioClip> load_noise_dir(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) {
    throw IoError("noise directory not found: " + dir);
  }
  std::vector<AudioClip> out;
  for (const std::string& file :
       sorted_entries(root, /*dirs_only=*/false)) {
    if (!has_wav_suffix(file)) continue;
    out.push_back(read_wav((root / file).string()));
  }
  return out;
}

}  // namespace kws
