// kws/dataset.h

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

#ifndef KWS_DATASET_H_
#define KWS_DATASET_H_

#include <cstdint>
#include <string>
#include <vector>

#include "kws/audio.h"
#include "kws/common.h"

namespace kws {

// The ten command words; every other word folder maps to class "unknown",
// which always comes last in class_names.
const std::vector<std::string>& gsc_keywords();

struct ManifestEntry {
  std::string rel_path;  // relative to the dataset root, e.g. "yes/abc.wav"
  int label = 0;
  // -1: the whole file is the example. >= 0: a one-second slice starting at
  // this sample (used for background-noise slices).
  int64_t start_sample = -1;
};

struct DatasetManifest {
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> valid;
  std::vector<ManifestEntry> test;
  std::vector<std::string> rejects;  // undecodable files, kept for reporting
};

// Scans a Speech-Commands-style directory: one folder per word plus
// validation_list.txt / testing_list.txt naming the held-out clips; every
// remaining clip is training data. _background_noise_ files become
// one-second training slices labeled unknown. Undecodable files land in
// `rejects` instead of aborting. A missing list file is a format error.
DatasetManifest ingest_gsc(const std::string& dataset_dir);

// Keeps only the requested keyword folders plus unknown examples drawn from
// `unknown_words` folders, relabeled as keywords 0..k-1 then "unknown".
// max_train_clips > 0 caps the training list, keeping a class-balanced
// prefix; 0 keeps everything.
DatasetManifest restrict_manifest(const DatasetManifest& manifest,
                                  const std::vector<std::string>& keywords,
                                  const std::vector<std::string>& unknown_words,
                                  int max_train_clips);

void save_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::string& path);

struct LoadedExample {
  AudioClip clip;
  int label = 0;
  int64_t example_id = 0;  // index within the split, stable across runs
  std::string utterance_id;
};

// Decodes every entry of one split ("train", "valid", or "test"). Slice
// entries are cut to one second. Honors KWS_NUM_WORKERS for decoding.
std::vector<LoadedExample> load_split(const DatasetManifest& manifest,
                                      const std::string& split,
                                      const std::string& dataset_dir);

// All *.wav files directly inside a directory, lexicographic, decoded.
std::vector<AudioClip> load_noise_dir(const std::string& dir);

}  // namespace kws

#endif  // KWS_DATASET_H_
