#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anomaly/timeseries.hpp"

namespace anomaly {

// Application profile weighting detection outcomes.
struct ScoreProfile {
  std::string name;
  double tp_weight;
  double fp_weight;
  double fn_weight;
};

ScoreProfile standard_profile();       // 1.0 / 0.11 / 1.0
ScoreProfile reward_low_fp_profile();  // 1.0 / 0.22 / 1.0
ScoreProfile reward_low_fn_profile();  // 1.0 / 0.11 / 2.0
std::vector<ScoreProfile> all_profiles();

// Ground-truth window around a labeled anomaly, inclusive timestamps.
struct AnomalyWindow {
  std::int64_t begin;
  std::int64_t end;
};

struct AnomalyWindowSet {
  std::vector<AnomalyWindow> windows;  // sorted, non-overlapping
  std::int64_t probation_end;          // detections at or before this are ignored
};

// Expands each label into a window of window_fraction * T / num_labels
// points centered on it, clipped to the series and merged when overlapping.
// The probationary period covers the first probation_fraction * T points.
// Labels are snapped to the nearest series timestamp; a label further than
// one sample interval from any timestamp is an error.
AnomalyWindowSet build_windows(const std::vector<std::int64_t>& labels,
                               const TimeSeries& series, double window_fraction = 0.10,
                               double probation_fraction = 0.15);

// Position weight in [-1, 1): 2 / (1 + exp(5 y)) - 1. y = -1 (window start)
// gives ~0.98661, y = 0 (window end) gives 0, y > 0 decays toward -1.
double scaled_sigmoid(double y);

struct FileScore {
  double raw = 0.0;
  int detected_windows = 0;
  int false_positives = 0;
  int missed_windows = 0;
};

// Scores one file's flag sequence against its ground-truth windows.
// Flags during probation are ignored. The earliest flag inside a window
// scores tp_weight * scaled_sigmoid(relative position); later flags in the
// same window are free. A flag outside every window costs
// fp_weight * scaled_sigmoid measured from the nearest preceding window
// (flat -fp_weight when there is none). Each undetected window costs
// fn_weight.
FileScore score_file(const std::vector<std::int64_t>& timestamps,
                     const std::vector<bool>& flags, const AnomalyWindowSet& windows,
                     const ScoreProfile& profile);

// Flags each window's first point once: the best attainable detector.
std::vector<bool> perfect_flags(const std::vector<std::int64_t>& timestamps,
                                const AnomalyWindowSet& windows);

// 100 * (raw - null_raw) / (perfect_raw - null_raw). Throws when the
// denominator is not positive.
double normalize_corpus(double raw, double perfect_raw, double null_raw);

// Corpus scoring summary for one profile.
struct ScoreReport {
  struct FileEntry {
    std::string file;
    double raw = 0.0;
    double perfect_raw = 0.0;
    double null_raw = 0.0;
    int detected_windows = 0;
    int false_positives = 0;
    int missed_windows = 0;
  };
  std::string profile;
  std::vector<FileEntry> files;
  double corpus_raw = 0.0;
  double corpus_perfect = 0.0;
  double corpus_null = 0.0;
  double normalized = 0.0;
};

ScoreReport make_report(const ScoreProfile& profile,
                        std::vector<ScoreReport::FileEntry> files);

// Renders reports as CSV: one row per file plus an "ALL" summary row per
// profile. `notes` lines are embedded as leading '#' comments.
std::string write_report_csv(const std::vector<ScoreReport>& reports,
                             const std::vector<std::string>& notes);

}  // namespace anomaly
