#include "anomaly/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace anomaly {

namespace {

std::string format_hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_hex(const std::string& token, int line) {
  const char* begin = token.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end != begin + token.size() || token.empty()) {
    throw ParseError("malformed number '" + token + "'", line);
  }
  return v;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Line reader that tracks numbers for error messages.
struct LineReader {
  std::istringstream in;
  int line = 0;

  explicit LineReader(const std::string& text) : in(text) {}

  std::string next() {
    std::string s;
    if (!std::getline(in, s)) {
      throw ParseError("unexpected end of checkpoint", line);
    }
    ++line;
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
  }

  // Returns the value part of a "key value" line.
  std::string expect(const std::string& key) {
    std::string s = next();
    if (s.size() < key.size() + 2 || s.compare(0, key.size(), key) != 0 ||
        s[key.size()] != ' ') {
      throw ParseError("expected '" + key + " ...', got '" + s + "'", line);
    }
    return s.substr(key.size() + 1);
  }
};

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot read '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) {
    throw IoError("error while reading '" + path + "'");
  }
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
    if (ec) {
      throw IoError("cannot create directory '" + p.parent_path().string() +
                    "': " + ec.message());
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write '" + path + "'");
  }
  out << text;
  out.flush();
  if (!out) {
    throw IoError("error while writing '" + path + "'");
  }
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  const AutoencoderConfig& c = ckpt.model.config;
  if (static_cast<Eigen::Index>(ckpt.dim_names.size()) != c.input_dim ||
      ckpt.norm.min.size() != c.input_dim || ckpt.norm.max.size() != c.input_dim) {
    throw std::invalid_argument("encode_checkpoint: dimension metadata mismatch");
  }
  std::string out = "anomaly-checkpoint v1\n";
  out += "input_dim " + std::to_string(c.input_dim) + "\n";
  out += "hidden_size " + std::to_string(c.hidden_size) + "\n";
  out += "window_length " + std::to_string(c.window_length) + "\n";
  out += "learning_rate " + format_hex(c.learning_rate) + "\n";
  out += "epochs " + std::to_string(c.epochs) + "\n";
  out += "batch_size " + std::to_string(c.batch_size) + "\n";
  out += "rng_seed " + std::to_string(c.rng_seed) + "\n";
  out += "clip_norm " + format_hex(c.clip_norm) + "\n";
  out += "interval " + std::to_string(ckpt.interval_s) + "\n";
  out += "fill " + format_hex(ckpt.fill_value) + "\n";
  for (const std::string& name : ckpt.dim_names) {
    out += "dim " + name + "\n";
  }
  out += "norm_min";
  for (Eigen::Index d = 0; d < c.input_dim; ++d) out += " " + format_hex(ckpt.norm.min[d]);
  out += "\nnorm_max";
  for (Eigen::Index d = 0; d < c.input_dim; ++d) out += " " + format_hex(ckpt.norm.max[d]);
  out += "\n";

  Eigen::VectorXd flat = pack_parameters(ckpt.model);
  out += "params " + std::to_string(flat.size()) + "\n";
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    out += format_hex(flat[i]);
    out += (i % 8 == 7 || i == flat.size() - 1) ? '\n' : ' ';
  }
  out += "end\n";
  return out;
}

Checkpoint decode_checkpoint(const std::string& text) {
  LineReader reader(text);
  if (reader.next() != "anomaly-checkpoint v1") {
    throw ParseError("not an anomaly-checkpoint v1 file", 1);
  }

  auto to_int = [&](const std::string& s) -> std::int64_t {
    try {
      return std::stoll(s);
    } catch (const std::exception&) {
      throw ParseError("malformed integer '" + s + "'", reader.line);
    }
  };

  AutoencoderConfig config;
  config.input_dim = to_int(reader.expect("input_dim"));
  config.hidden_size = to_int(reader.expect("hidden_size"));
  config.window_length = to_int(reader.expect("window_length"));
  config.learning_rate = parse_hex(reader.expect("learning_rate"), reader.line);
  config.epochs = static_cast<int>(to_int(reader.expect("epochs")));
  config.batch_size = static_cast<int>(to_int(reader.expect("batch_size")));
  config.rng_seed = static_cast<std::uint64_t>(to_int(reader.expect("rng_seed")));
  config.clip_norm = parse_hex(reader.expect("clip_norm"), reader.line);

  Checkpoint ckpt;
  ckpt.interval_s = to_int(reader.expect("interval"));
  ckpt.fill_value = parse_hex(reader.expect("fill"), reader.line);
  for (Eigen::Index d = 0; d < config.input_dim; ++d) {
    ckpt.dim_names.push_back(reader.expect("dim"));
  }

  auto parse_vector = [&](const std::string& key) {
    std::istringstream line(reader.expect(key));
    Eigen::VectorXd v(config.input_dim);
    std::string token;
    for (Eigen::Index d = 0; d < config.input_dim; ++d) {
      if (!(line >> token)) {
        throw ParseError(key + " has fewer than " + std::to_string(config.input_dim) +
                             " entries",
                         reader.line);
      }
      v[d] = parse_hex(token, reader.line);
    }
    return v;
  };
  ckpt.norm.min = parse_vector("norm_min");
  ckpt.norm.max = parse_vector("norm_max");

  const Eigen::Index expected = to_int(reader.expect("params"));
  ckpt.model = init_model(config);
  if (expected != parameter_count(ckpt.model)) {
    throw ParseError("checkpoint declares " + std::to_string(expected) +
                         " parameters, model shape needs " +
                         std::to_string(parameter_count(ckpt.model)),
                     reader.line);
  }
  Eigen::VectorXd flat(expected);
  Eigen::Index k = 0;
  while (k < expected) {
    std::istringstream line(reader.next());
    std::string token;
    while (line >> token) {
      if (k == expected) {
        throw ParseError("more than " + std::to_string(expected) + " parameters",
                         reader.line);
      }
      flat[k++] = parse_hex(token, reader.line);
    }
  }
  unpack_parameters(flat, ckpt.model);
  if (reader.next() != "end") {
    throw ParseError("missing end marker", reader.line);
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file(path));
}

TrainOutput run_train(const TimeSeries& raw, const RunConfig& config) {
  validate(raw);
  if (raw.empty()) {
    throw std::invalid_argument("run_train: empty series");
  }
  TimeSeries agg = aggregate(raw, config.interval_s, config.fill_value);

  const Eigen::Index train_count = std::min<Eigen::Index>(
      agg.size(),
      static_cast<Eigen::Index>(std::floor(config.train_fraction *
                                           static_cast<double>(agg.size()))));
  if (train_count < config.model.window_length) {
    throw std::invalid_argument(
        "run_train: training prefix of " + std::to_string(train_count) +
        " points is shorter than the " + std::to_string(config.model.window_length) +
        "-point window; increase train_fraction or supply more data");
  }
  TimeSeries train_series;
  train_series.timestamps.assign(agg.timestamps.begin(), agg.timestamps.begin() + train_count);
  train_series.values = agg.values.topRows(train_count);
  train_series.dim_names = agg.dim_names;

  AutoencoderConfig model_config = config.model;
  model_config.input_dim = agg.dims();

  NormalizationParams norm = minmax_fit(train_series);
  TimeSeries normalized = minmax_apply(train_series, norm);
  WindowedDataset dataset =
      make_windows(normalized, model_config.window_length, config.train_stride);

  TrainResult trained = train(dataset, model_config);

  TrainOutput out;
  out.checkpoint.model = std::move(trained.model);
  out.checkpoint.norm = std::move(norm);
  out.checkpoint.dim_names = agg.dim_names.empty()
                                 ? std::vector<std::string>(
                                       static_cast<std::size_t>(agg.dims()), "value")
                                 : agg.dim_names;
  out.checkpoint.interval_s = config.interval_s;
  out.checkpoint.fill_value = config.fill_value;
  out.epoch_losses = std::move(trained.epoch_losses);
  out.train_points = train_count;
  return out;
}

DetectOutput run_detect(const TimeSeries& raw, const Checkpoint& ckpt,
                        const LikelihoodConfig& likelihood) {
  validate(raw);
  DetectOutput out;
  out.aggregated = aggregate(raw, ckpt.interval_s, ckpt.fill_value);
  if (out.aggregated.dims() != ckpt.model.config.input_dim) {
    throw std::invalid_argument("run_detect: series has " +
                                std::to_string(out.aggregated.dims()) +
                                " dimensions, checkpoint expects " +
                                std::to_string(ckpt.model.config.input_dim));
  }
  out.dim_names = ckpt.dim_names;

  TimeSeries normalized = minmax_apply(out.aggregated, ckpt.norm);
  out.errors = reconstruction_errors(ckpt.model, normalized);
  out.likelihood = likelihood_series(out.errors, likelihood);

  const Eigen::Index offset = ckpt.model.config.window_length - 1;
  out.records.resize(out.errors.errors.size());
  for (std::size_t i = 0; i < out.records.size(); ++i) {
    DetectionRecord& rec = out.records[i];
    rec.timestamp = out.errors.timestamps[i];
    const Eigen::Index row = offset + static_cast<Eigen::Index>(i);
    rec.raw_values.resize(static_cast<std::size_t>(out.aggregated.dims()));
    for (Eigen::Index d = 0; d < out.aggregated.dims(); ++d) {
      rec.raw_values[static_cast<std::size_t>(d)] = out.aggregated.values(row, d);
    }
    rec.error = out.errors.errors[i];
    rec.likelihood = out.likelihood.likelihood[i];
    rec.flagged = out.likelihood.flags[i];
  }
  return out;
}

std::vector<ScoreProfile> select_profiles(const std::string& name) {
  if (name == "all") return all_profiles();
  if (name == "standard") return {standard_profile()};
  if (name == "low-fp" || name == "reward_low_fp") return {reward_low_fp_profile()};
  if (name == "low-fn" || name == "reward_low_fn") return {reward_low_fn_profile()};
  throw std::invalid_argument("unknown profile '" + name +
                              "' (expected standard, low-fp, low-fn or all)");
}

std::vector<ScoreReport::FileEntry> score_detections(
    const std::string& file, const std::vector<std::int64_t>& timestamps,
    const std::vector<bool>& flags, const std::vector<std::int64_t>& labels,
    const RunConfig& config, const std::vector<ScoreProfile>& profiles) {
  TimeSeries support;
  support.timestamps = timestamps;
  support.values.resize(static_cast<Eigen::Index>(timestamps.size()), 1);
  support.values.setZero();
  AnomalyWindowSet windows =
      build_windows(labels, support, config.window_fraction, config.probation_fraction);

  std::vector<bool> best = perfect_flags(timestamps, windows);
  std::vector<bool> none(timestamps.size(), false);

  std::vector<ScoreReport::FileEntry> entries;
  entries.reserve(profiles.size());
  for (const ScoreProfile& profile : profiles) {
    FileScore detected = score_file(timestamps, flags, windows, profile);
    FileScore perfect = score_file(timestamps, best, windows, profile);
    FileScore null_score = score_file(timestamps, none, windows, profile);
    ScoreReport::FileEntry entry;
    entry.file = file;
    entry.raw = detected.raw;
    entry.perfect_raw = perfect.raw;
    entry.null_raw = null_score.raw;
    entry.detected_windows = detected.detected_windows;
    entry.false_positives = detected.false_positives;
    entry.missed_windows = detected.missed_windows;
    entries.push_back(std::move(entry));
  }
  return entries;
}

namespace {

CorpusFileResult process_corpus_file(const std::string& name, const std::string& csv_text,
                                     const std::vector<std::int64_t>& labels,
                                     const RunConfig& config,
                                     const std::vector<ScoreProfile>& profiles,
                                     std::string* detections_csv) {
  CorpusFileResult result;
  result.file = name;
  try {
    TimeSeries raw = parse_metric_csv(csv_text);

    RunConfig local = config;
    // Independent draw streams per file, stable across runs.
    local.model.rng_seed = config.model.rng_seed ^ fnv1a(name);

    TrainOutput trained = run_train(raw, local);
    DetectOutput detections = run_detect(raw, trained.checkpoint, local.likelihood);

    std::vector<std::int64_t> timestamps(detections.records.size());
    std::vector<bool> flags(detections.records.size());
    for (std::size_t i = 0; i < detections.records.size(); ++i) {
      timestamps[i] = detections.records[i].timestamp;
      flags[i] = detections.records[i].flagged;
    }
    result.entries =
        score_detections(name, timestamps, flags, labels, local, profiles);
    if (detections_csv) {
      *detections_csv = write_detections(detections.records, detections.dim_names);
    }
    result.ok = true;
  } catch (const std::exception& e) {
    result.error = e.what();
  }
  return result;
}

}  // namespace

CorpusResult run_corpus(const std::string& data_dir, const LabelSet& labels,
                        const RunConfig& config, const std::string& detections_dir) {
  if (labels.empty()) {
    throw std::invalid_argument("run_corpus: no files in label set");
  }
  std::vector<ScoreProfile> profiles = select_profiles(config.profile);

  struct Task {
    std::string name;
    const std::vector<std::int64_t>* labels;
  };
  std::vector<Task> tasks;
  tasks.reserve(labels.size());
  for (const auto& [name, stamps] : labels) {
    tasks.push_back({name, &stamps});
  }

  CorpusResult result;
  result.files.resize(tasks.size());
  std::vector<std::string> detection_texts(tasks.size());

  const int jobs = std::max(1, config.jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      std::string text;
      try {
        text = read_file(data_dir + "/" + tasks[i].name);
      } catch (const std::exception& e) {
        result.files[i].file = tasks[i].name;
        result.files[i].error = e.what();
        continue;
      }
      result.files[i] =
          process_corpus_file(tasks[i].name, text, *tasks[i].labels, config, profiles,
                              detections_dir.empty() ? nullptr : &detection_texts[i]);
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t p = 0; p < profiles.size(); ++p) {
    std::vector<ScoreReport::FileEntry> entries;
    for (const CorpusFileResult& f : result.files) {
      if (f.ok) entries.push_back(f.entries[p]);
    }
    if (entries.empty()) {
      throw std::runtime_error("run_corpus: every file failed (first error: " +
                               (result.files.empty() ? std::string("none")
                                                     : result.files.front().error) +
                               ")");
    }
    result.reports.push_back(make_report(profiles[p], std::move(entries)));
  }
  for (const CorpusFileResult& f : result.files) {
    if (!f.ok) ++result.failed;
  }
  if (!detections_dir.empty()) {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (result.files[i].ok) {
        write_file(detections_dir + "/" + tasks[i].name, detection_texts[i]);
      }
    }
  }
  return result;
}

}  // namespace anomaly
