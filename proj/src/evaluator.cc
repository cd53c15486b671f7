// kws/evaluator.cc

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

#include "kws/evaluator.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace kws {

Aggregation parse_aggregation(const std::string& name) {
  if (name == "max") return Aggregation::kMax;
  if (name == "mean") return Aggregation::kMean;
  throw ConfigError("unknown aggregation: " + name);
}

const char* aggregation_name(Aggregation agg) {
  switch (agg) {
    case Aggregation::kMax: return "max";
    case Aggregation::kMean: return "mean";
  }
  throw ContractError("aggregation_name: bad enum value");
}

std::vector<float> sliding_window_scores(Model& model,
                                         const FeatureMatrix& features,
                                         int window_frames, int shift,
                                         Aggregation agg) {
  KWS_CHECK(window_frames >= 1, "sliding_window_scores: bad window");
  KWS_CHECK(shift >= 1, "sliding_window_scores: bad shift");
  FeatureMatrix padded = features.frames < window_frames
                             ? fit_to_frames(features, window_frames)
                             : features;
  const int frames = padded.frames;
  const int dim = padded.dim;
  const int num_windows = (frames - window_frames) / shift + 1;

  std::vector<float> xdata(static_cast<size_t>(num_windows) * window_frames *
                           dim);
  for (int w = 0; w < num_windows; ++w) {
    const int offset = w * shift;
    std::copy(padded.data.begin() +
                  static_cast<int64_t>(offset) * dim,
              padded.data.begin() +
                  static_cast<int64_t>(offset + window_frames) * dim,
              xdata.begin() + static_cast<int64_t>(w) * window_frames * dim);
  }
  Tensor x = Tensor::from_data({num_windows, 1, window_frames, dim},
                               std::move(xdata));
  Tensor logits = model.forward(nullptr, x, 0, BnMode::kEval);
  Tensor probs = softmax(logits);
  const int classes = probs.dim(1);

  std::vector<float> out(static_cast<size_t>(classes),
                         agg == Aggregation::kMax ? -1.0f : 0.0f);
  for (int w = 0; w < num_windows; ++w) {
    const float* row = probs.data() + static_cast<int64_t>(w) * classes;
    for (int c = 0; c < classes; ++c) {
      if (agg == Aggregation::kMax) {
        out[static_cast<size_t>(c)] = std::max(out[static_cast<size_t>(c)],
                                               row[c]);
      } else {
        out[static_cast<size_t>(c)] += row[c];
      }
    }
  }
  if (agg == Aggregation::kMean) {
    for (float& v : out) v /= static_cast<float>(num_windows);
  }
  return out;
}

std::vector<ScoreRecord> score_examples(Model& model,
                                        const std::vector<LoadedExample>& examples,
                                        const EvalOptions& opts) {
  std::vector<FeatureMatrix> feats(examples.size());
  parallel_for(static_cast<int64_t>(examples.size()), [&](int64_t i) {
    feats[static_cast<size_t>(i)] =
        logmel(examples[static_cast<size_t>(i)].clip);
  });
  std::vector<ScoreRecord> out(examples.size());
  for (size_t i = 0; i < examples.size(); ++i) {
    out[i].utterance_id = examples[i].utterance_id;
    out[i].true_label = examples[i].label;
    out[i].scores = sliding_window_scores(model, feats[i], opts.window_frames,
                                          opts.shift, opts.aggregation);
  }
  return out;
}

std::vector<DetPoint> det_curve(const std::vector<float>& positives,
                                const std::vector<float>& negatives) {
  KWS_CHECK(!positives.empty(), "det_curve: no positive scores");
  KWS_CHECK(!negatives.empty(), "det_curve: no negative scores");
  std::vector<float> pos = positives;
  std::vector<float> neg = negatives;
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());

  std::vector<float> thresholds;
  thresholds.reserve(pos.size() + neg.size());
  thresholds.insert(thresholds.end(), pos.begin(), pos.end());
  thresholds.insert(thresholds.end(), neg.begin(), neg.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  std::vector<DetPoint> curve;
  curve.reserve(thresholds.size());
  for (float t : thresholds) {
    DetPoint p;
    p.threshold = t;
    const auto neg_ge =
        neg.end() - std::lower_bound(neg.begin(), neg.end(), t);
    const auto pos_lt =
        std::lower_bound(pos.begin(), pos.end(), t) - pos.begin();
    p.far = static_cast<double>(neg_ge) / static_cast<double>(neg.size());
    p.frr = static_cast<double>(pos_lt) / static_cast<double>(pos.size());
    curve.push_back(p);
  }
  return curve;
}

FrrAtFar frr_at_far(const std::vector<DetPoint>& curve, double far_target) {
  KWS_CHECK(!curve.empty(), "frr_at_far: empty curve");
  KWS_CHECK(far_target >= 0.0 && far_target <= 1.0,
            "frr_at_far: target outside [0, 1]");
  // Thresholds ascend, so FAR descends along the curve.
  FrrAtFar out;
  if (far_target >= curve.front().far) {
    out.frr = curve.front().frr;
    out.achieved_far = curve.front().far;
    out.reached = true;
    return out;
  }
  if (far_target < curve.back().far) {
    out.frr = curve.back().frr;
    out.achieved_far = curve.back().far;
    out.reached = false;
    return out;
  }
  for (size_t i = 0; i + 1 < curve.size(); ++i) {
    const double hi = curve[i].far;
    const double lo = curve[i + 1].far;
    if (hi >= far_target && far_target >= lo) {
      const double denom = hi - lo;
      const double frac = denom > 0.0 ? (hi - far_target) / denom : 0.0;
      out.frr = curve[i].frr + frac * (curve[i + 1].frr - curve[i].frr);
      out.achieved_far = far_target;
      out.reached = true;
      return out;
    }
  }
  throw ContractError("frr_at_far: curve not monotone");
}

double auc(const std::vector<float>& positives,
           const std::vector<float>& negatives) {
  KWS_CHECK(!positives.empty(), "auc: no positive scores");
  KWS_CHECK(!negatives.empty(), "auc: no negative scores");
  struct Item {
    float score;
    bool positive;
  };
  std::vector<Item> items;
  items.reserve(positives.size() + negatives.size());
  for (float s : positives) items.push_back({s, true});
  for (float s : negatives) items.push_back({s, false});
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.score < b.score; });

  // Midranks: a run of equal scores shares the average of its rank span.
  double pos_rank_sum = 0.0;
  size_t i = 0;
  while (i < items.size()) {
    size_t j = i;
    while (j < items.size() && items[j].score == items[i].score) ++j;
    const double midrank =
        0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (size_t k = i; k < j; ++k) {
      if (items[k].positive) pos_rank_sum += midrank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives.size());
  const double n = static_cast<double>(negatives.size());
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double top1_accuracy(const std::vector<ScoreRecord>& records) {
  KWS_CHECK(!records.empty(), "top1_accuracy: no records");
  int64_t correct = 0;
  for (const ScoreRecord& r : records) {
    KWS_CHECK(!r.scores.empty(), "top1_accuracy: record without scores");
    int best = 0;
    for (int c = 1; c < static_cast<int>(r.scores.size()); ++c) {
      if (r.scores[static_cast<size_t>(c)] >
          r.scores[static_cast<size_t>(best)]) {
        best = c;
      }
    }
    if (best == r.true_label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

void split_detection_scores(const std::vector<ScoreRecord>& records,
                            int negative_class, std::vector<float>* positives,
                            std::vector<float>* negatives) {
  KWS_CHECK(positives != nullptr && negatives != nullptr,
            "split_detection_scores: null output");
  positives->clear();
  negatives->clear();
  for (const ScoreRecord& r : records) {
    const int classes = static_cast<int>(r.scores.size());
    KWS_CHECK(negative_class >= 0 && negative_class < classes,
              "split_detection_scores: negative class out of range");
    float best_keyword = -1.0f;
    for (int c = 0; c < classes; ++c) {
      if (c == negative_class) continue;
      best_keyword = std::max(best_keyword, r.scores[static_cast<size_t>(c)]);
    }
    if (r.true_label == negative_class) {
      negatives->push_back(best_keyword);
    } else {
      KWS_CHECK(r.true_label >= 0 && r.true_label < classes,
                "split_detection_scores: label out of range");
      positives->push_back(r.scores[static_cast<size_t>(r.true_label)]);
    }
  }
}

namespace {

std::string format_float(float v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace

void write_scores_csv(const std::string& path,
                      const std::vector<ScoreRecord>& records) {
  KWS_CHECK(!records.empty(), "write_scores_csv: no records");
  const size_t classes = records.front().scores.size();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scores: " + path);
  out << "utterance_id,true_label";
  for (size_t c = 0; c < classes; ++c) out << ",score_" << c;
  out << "\n";
  for (const ScoreRecord& r : records) {
    KWS_CHECK(r.scores.size() == classes,
              "write_scores_csv: inconsistent class count");
    KWS_CHECK(r.utterance_id.find(',') == std::string::npos,
              "write_scores_csv: comma in utterance id");
    out << r.utterance_id << "," << r.true_label;
    for (float s : r.scores) out << "," << format_float(s);
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<ScoreRecord> read_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read scores: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError("scores csv " + path + ": empty file");
  }
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "utterance_id" ||
      header[1] != "true_label") {
    throw FormatError("scores csv " + path + ": bad header");
  }
  for (size_t c = 2; c < header.size(); ++c) {
    if (header[c] != "score_" + std::to_string(c - 2)) {
      throw FormatError("scores csv " + path + ": bad header column " +
                        header[c]);
    }
  }
  std::vector<ScoreRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw FormatError("scores csv " + path + ": row with " +
                        std::to_string(fields.size()) + " fields");
    }
    ScoreRecord r;
    r.utterance_id = fields[0];
    try {
      r.true_label = std::stoi(fields[1]);
      for (size_t c = 2; c < fields.size(); ++c) {
        r.scores.push_back(std::stof(fields[c]));
      }
    } catch (const std::exception&) {
      throw FormatError("scores csv " + path + ": unparsable row");
    }
    records.push_back(std::move(r));
  }
  return records;
}

void write_det_csv(const std::string& path,
                   const std::vector<DetPoint>& curve) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write det curve: " + path);
  out << "threshold,far,frr\n";
  for (const DetPoint& p : curve) {
    out << format_float(p.threshold) << "," << format_double(p.far) << ","
        << format_double(p.frr) << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace kws
