// kws/window.h

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

#ifndef KWS_WINDOW_H_
#define KWS_WINDOW_H_

#include <cstdint>
#include <string>

#include "kws/disnorm.h"
#include "kws/features.h"

namespace kws {

// The training/inference unit: a fixed-length time x frequency log-Mel patch
// with its label and provenance tag.
struct FeatureWindow {
  FeatureMatrix features;
  int label = 0;
  DatasourceTag tag;
  int64_t example_id = 0;
  std::string utterance_id;
};

}  // namespace kws

#endif  // KWS_WINDOW_H_
