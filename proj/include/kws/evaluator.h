// kws/evaluator.h

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

#ifndef KWS_EVALUATOR_H_
#define KWS_EVALUATOR_H_

#include <string>
#include <vector>

#include "kws/dataset.h"
#include "kws/features.h"
#include "kws/model.h"

namespace kws {

enum class Aggregation { kMax, kMean };
Aggregation parse_aggregation(const std::string& name);
const char* aggregation_name(Aggregation agg);

// Per-class posterior for one utterance: slide a window of `window_frames`
// frames at `shift`-frame hops (clips shorter than one window are right-padded
// with the log floor), softmax each window on branch 0 in eval mode, then
// aggregate per class across windows.
std::vector<float> sliding_window_scores(Model& model,
                                         const FeatureMatrix& features,
                                         int window_frames, int shift = 10,
                                         Aggregation agg = Aggregation::kMax);

struct ScoreRecord {
  std::string utterance_id;
  int true_label = 0;
  std::vector<float> scores;  // one per class
};

struct EvalOptions {
  int window_frames = 100;
  int shift = 10;
  Aggregation aggregation = Aggregation::kMax;
};

// Scores every example. Honors KWS_NUM_WORKERS for feature extraction.
std::vector<ScoreRecord> score_examples(Model& model,
                                        const std::vector<LoadedExample>& examples,
                                        const EvalOptions& opts);

struct DetPoint {
  float threshold = 0.0f;
  double far = 0.0;  // fraction of negatives scoring >= threshold
  double frr = 0.0;  // fraction of positives scoring < threshold
};

// One point per distinct observed score, thresholds ascending. No sentinel
// thresholds: the curve covers exactly the operating points the data
// supports.
std::vector<DetPoint> det_curve(const std::vector<float>& positives,
                                const std::vector<float>& negatives);

struct FrrAtFar {
  double frr = 0.0;
  double achieved_far = 0.0;
  bool reached = false;  // false: target FAR below the achievable range
};

// FRR at the target FAR by linear interpolation between adjacent curve
// points. An unreachable target reports the closest achievable point.
FrrAtFar frr_at_far(const std::vector<DetPoint>& curve, double far_target);

// Area under the ROC curve via the rank statistic; ties count half.
double auc(const std::vector<float>& positives,
           const std::vector<float>& negatives);

// Argmax accuracy; the lowest index wins ties.
double top1_accuracy(const std::vector<ScoreRecord>& records);

// Detection split for keyword-vs-unknown scoring: a record labeled with a
// keyword class contributes its own-class score as a positive; a record
// labeled `negative_class` contributes its best keyword-class score as a
// negative.
void split_detection_scores(const std::vector<ScoreRecord>& records,
                            int negative_class, std::vector<float>* positives,
                            std::vector<float>* negatives);

// CSV: header utterance_id,true_label,score_0..score_{K-1}; one row per
// utterance. Scores survive a write/read roundtrip bit-exactly.
void write_scores_csv(const std::string& path,
                      const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> read_scores_csv(const std::string& path);

// CSV: header threshold,far,frr.
void write_det_csv(const std::string& path,
                   const std::vector<DetPoint>& curve);

}  // namespace kws

#endif  // KWS_EVALUATOR_H_
