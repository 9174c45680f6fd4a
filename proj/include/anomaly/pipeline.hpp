#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "anomaly/ingest.hpp"
#include "anomaly/likelihood.hpp"
#include "anomaly/nn.hpp"
#include "anomaly/scoring.hpp"
#include "anomaly/timeseries.hpp"

namespace anomaly {

// Filesystem-level failure (missing file, unwritable path).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path);
// Creates parent directories as needed.
void write_file(const std::string& path, const std::string& text);

// End-to-end settings shared by the command-line entry points.
struct RunConfig {
  AutoencoderConfig model;
  LikelihoodConfig likelihood;
  std::int64_t interval_s = 300;  // aggregation bucket width, 0 disables
  double fill_value = -1.0;       // emitted for empty aggregation buckets
  double train_fraction = 0.15;   // leading fraction of points used to fit
  Eigen::Index train_stride = 1;
  double window_fraction = 0.10;
  double probation_fraction = 0.15;
  std::string profile = "all";
  int jobs = 1;
};

// Everything needed to resume detection: model weights, the normalization
// fitted at training time, and the aggregation settings the model saw.
struct Checkpoint {
  AutoencoderModel model;
  NormalizationParams norm;
  std::vector<std::string> dim_names;
  std::int64_t interval_s = 300;
  double fill_value = -1.0;
};

// Versioned text format; floating-point fields are hexadecimal literals, so
// save/load round-trips bit for bit.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& text);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

struct TrainOutput {
  Checkpoint checkpoint;
  std::vector<double> epoch_losses;
  Eigen::Index train_points = 0;  // series length after aggregation used to fit
};

// Aggregates, fits normalization on the leading train_fraction of the
// series, windows it and trains the autoencoder.
TrainOutput run_train(const TimeSeries& raw, const RunConfig& config);

struct DetectOutput {
  TimeSeries aggregated;  // model input before normalization
  std::vector<DetectionRecord> records;
  std::vector<std::string> dim_names;
  ErrorSeries errors;
  LikelihoodSeries likelihood;
};

// Aggregates with the checkpoint's settings, normalizes, and scores every
// complete window. Record i covers aggregated point window_length - 1 + i.
DetectOutput run_detect(const TimeSeries& raw, const Checkpoint& ckpt,
                        const LikelihoodConfig& likelihood);

// Profile selector: "standard", "low-fp", "low-fn" or "all".
std::vector<ScoreProfile> select_profiles(const std::string& name);

// Scores one file's detections against its labels. Returns one entry per
// profile, in `profiles` order.
std::vector<ScoreReport::FileEntry> score_detections(
    const std::string& file, const std::vector<std::int64_t>& timestamps,
    const std::vector<bool>& flags, const std::vector<std::int64_t>& labels,
    const RunConfig& config, const std::vector<ScoreProfile>& profiles);

struct CorpusFileResult {
  std::string file;
  bool ok = false;
  std::string error;
  std::vector<ScoreReport::FileEntry> entries;  // one per profile when ok
};

struct CorpusResult {
  std::vector<ScoreReport> reports;  // one per profile
  std::vector<CorpusFileResult> files;
  int failed = 0;
};

// Trains and detects on every file named in `labels` under data_dir
// (relative paths), then scores the corpus. Individual file failures are
// recorded and skipped. When detections_dir is non-empty, per-file detection
// CSVs are written beneath it. Files are processed with config.jobs threads.
CorpusResult run_corpus(const std::string& data_dir, const LabelSet& labels,
                        const RunConfig& config, const std::string& detections_dir);

}  // namespace anomaly
