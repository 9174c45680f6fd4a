#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "anomaly/ingest.hpp"
#include "anomaly/pipeline.hpp"
#include "anomaly/svgplot.hpp"

namespace {

using namespace anomaly;

// Applies a flat key=value config file ('#' starts a comment). Keys mirror
// the long command-line flags; flags passed on the command line win.
void apply_config_file(const std::string& path, RunConfig& cfg, bool& seed_set) {
  std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::size_t begin = line.find_first_not_of(" \t");
    if (begin == std::string::npos) continue;
    std::size_t end = line.find_last_not_of(" \t");
    line = line.substr(begin, end - begin + 1);

    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config: expected key=value, got '" + line + "'", line_no);
    }
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto strip = [](std::string& s) {
      std::size_t b = s.find_first_not_of(" \t");
      std::size_t e = s.find_last_not_of(" \t");
      s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
    };
    strip(key);
    strip(value);

    try {
      if (key == "hidden") {
        cfg.model.hidden_size = std::stoll(value);
      } else if (key == "window") {
        cfg.model.window_length = std::stoll(value);
      } else if (key == "epochs") {
        cfg.model.epochs = std::stoi(value);
      } else if (key == "batch") {
        cfg.model.batch_size = std::stoi(value);
      } else if (key == "lr") {
        cfg.model.learning_rate = std::stod(value);
      } else if (key == "clip") {
        cfg.model.clip_norm = std::stod(value);
      } else if (key == "seed") {
        cfg.model.rng_seed = std::stoull(value);
        seed_set = true;
      } else if (key == "long-window") {
        cfg.likelihood.long_window = std::stoi(value);
      } else if (key == "short-window") {
        cfg.likelihood.short_window = std::stoi(value);
      } else if (key == "epsilon") {
        cfg.likelihood.epsilon = std::stod(value);
      } else if (key == "sigma-floor") {
        cfg.likelihood.sigma_floor = std::stod(value);
      } else if (key == "interval") {
        cfg.interval_s = std::stoll(value);
      } else if (key == "fill") {
        cfg.fill_value = std::stod(value);
      } else if (key == "train-fraction") {
        cfg.train_fraction = std::stod(value);
      } else if (key == "train-stride") {
        cfg.train_stride = std::stoll(value);
      } else if (key == "window-fraction") {
        cfg.window_fraction = std::stod(value);
      } else if (key == "probation-fraction") {
        cfg.probation_fraction = std::stod(value);
      } else if (key == "profile") {
        cfg.profile = value;
      } else if (key == "jobs") {
        cfg.jobs = std::stoi(value);
      } else {
        throw ParseError("config: unknown key '" + key + "'", line_no);
      }
    } catch (const std::invalid_argument&) {
      throw ParseError("config: bad value '" + value + "' for key '" + key + "'", line_no);
    } catch (const std::out_of_range&) {
      throw ParseError("config: value '" + value + "' out of range for key '" + key + "'",
                       line_no);
    }
  }
}

std::string resolve_label_key(const LabelSet& labels, const std::string& name,
                              const std::string& data_path) {
  if (!name.empty()) {
    if (labels.count(name)) return name;
    throw std::runtime_error("no labels for '" + name + "'");
  }
  if (labels.count(data_path)) return data_path;
  std::string base = std::filesystem::path(data_path).filename().string();
  std::vector<std::string> matches;
  for (const auto& [key, stamps] : labels) {
    if (key == base || std::filesystem::path(key).filename().string() == base) {
      matches.push_back(key);
    }
  }
  if (matches.size() == 1) return matches.front();
  if (labels.size() == 1) return labels.begin()->first;
  throw std::runtime_error(
      "cannot tell which label entry covers '" + data_path +
      "'; pass --name with one of the label file keys");
}

std::vector<std::string> report_notes(const RunConfig& cfg) {
  char buf[160];
  std::vector<std::string> notes;
  std::snprintf(buf, sizeof(buf),
                "anomaly windows: %.4g of series points split across labels, centered on "
                "each label, merged on overlap",
                cfg.window_fraction);
  notes.push_back(buf);
  std::snprintf(buf, sizeof(buf),
                "probationary period: first %.4g of points; detections there are ignored",
                cfg.probation_fraction);
  notes.push_back(buf);
  std::snprintf(buf, sizeof(buf),
                "training: leading %.4g of aggregated points per file, interval %lld s",
                cfg.train_fraction, static_cast<long long>(cfg.interval_s));
  notes.push_back(buf);
  return notes;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  bool seed_in_config = false;

  // The config file must load before CLI11 binds defaults, so find it first.
  std::string config_path;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) {
      config_path = argv[i + 1];
    } else if (arg.rfind("--config=", 0) == 0) {
      config_path = arg.substr(9);
    }
  }
  if (!config_path.empty()) {
    try {
      apply_config_file(config_path, cfg, seed_in_config);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "anomalyd: %s\n", e.what());
      return 2;
    }
  }

  CLI::App app{"GRU autoencoder anomaly detection over metric time series"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_dummy;
  app.add_option("--config", config_dummy, "flat key=value config file");

  app.add_option("--hidden", cfg.model.hidden_size, "GRU hidden units")
      ->capture_default_str();
  app.add_option("--window", cfg.model.window_length, "window length in points")
      ->capture_default_str();
  app.add_option("--epochs", cfg.model.epochs, "training epochs")->capture_default_str();
  app.add_option("--batch", cfg.model.batch_size, "mini-batch size")->capture_default_str();
  app.add_option("--lr", cfg.model.learning_rate, "learning rate")->capture_default_str();
  app.add_option("--clip", cfg.model.clip_norm, "gradient norm clip, <= 0 disables")
      ->capture_default_str();
  auto* seed_opt =
      app.add_option("--seed", cfg.model.rng_seed, "rng seed")->capture_default_str();
  app.add_option("--long-window", cfg.likelihood.long_window,
                 "baseline window for likelihood statistics")
      ->capture_default_str();
  app.add_option("--short-window", cfg.likelihood.short_window,
                 "recent window for likelihood")
      ->capture_default_str();
  app.add_option("--epsilon", cfg.likelihood.epsilon, "flag when likelihood >= 1 - epsilon")
      ->capture_default_str();
  app.add_option("--sigma-floor", cfg.likelihood.sigma_floor, "minimum baseline stddev")
      ->capture_default_str();
  auto* interval_opt =
      app.add_option("--interval", cfg.interval_s, "aggregation bucket seconds, 0 disables")
          ->capture_default_str();
  app.add_option("--fill", cfg.fill_value, "value for empty aggregation buckets")
      ->capture_default_str();
  app.add_option("--train-fraction", cfg.train_fraction,
                 "leading fraction of points used for training")
      ->capture_default_str();
  app.add_option("--train-stride", cfg.train_stride, "stride between training windows")
      ->capture_default_str();
  app.add_option("--window-fraction", cfg.window_fraction,
                 "scoring: fraction of points spread across anomaly windows")
      ->capture_default_str();
  app.add_option("--probation-fraction", cfg.probation_fraction,
                 "scoring: leading fraction of points never scored")
      ->capture_default_str();
  app.add_option("--profile", cfg.profile, "standard, low-fp, low-fn or all")
      ->capture_default_str();
  app.add_option("--jobs", cfg.jobs, "parallel files for run-corpus")->capture_default_str();

  std::string data_path, labels_path, model_path, out_path, label_name;

  CLI::App* train_cmd = app.add_subcommand("train", "fit a model on a metric CSV");
  train_cmd->add_option("--data", data_path, "metric CSV")->required();
  train_cmd->add_option("--model", model_path, "checkpoint output path")->required();
  train_cmd->add_option("--out", out_path, "epoch loss CSV output path");

  CLI::App* detect_cmd =
      app.add_subcommand("detect", "score a metric CSV with a trained model");
  detect_cmd->add_option("--data", data_path, "metric CSV")->required();
  detect_cmd->add_option("--model", model_path, "checkpoint path")->required();
  detect_cmd->add_option("--out", out_path, "detections CSV output path")->required();

  CLI::App* score_cmd = app.add_subcommand("score", "score detections against labels");
  score_cmd->add_option("--data", data_path, "detections CSV")->required();
  score_cmd->add_option("--labels", labels_path, "combined labels JSON")->required();
  score_cmd->add_option("--out", out_path, "report CSV output path");
  score_cmd->add_option("--name", label_name, "label key for this file");

  CLI::App* corpus_cmd =
      app.add_subcommand("run-corpus", "train, detect and score every labeled file");
  corpus_cmd->add_option("--data", data_path, "corpus root directory")->required();
  corpus_cmd->add_option("--labels", labels_path, "combined labels JSON")->required();
  corpus_cmd->add_option("--out", out_path, "output directory")->required();

  CLI::App* plot_cmd = app.add_subcommand("plot", "render detections as SVG");
  plot_cmd->add_option("--data", data_path, "detections CSV")->required();
  plot_cmd->add_option("--out", out_path, "SVG output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (seed_opt->count() == 0 && !seed_in_config) {
    if (const char* env = std::getenv("ANOMALYD_SEED")) {
      try {
        cfg.model.rng_seed = std::stoull(env);
      } catch (const std::exception&) {
        std::fprintf(stderr, "anomalyd: ANOMALYD_SEED is not an integer: '%s'\n", env);
        return 2;
      }
    }
  }

  try {
    if (train_cmd->parsed()) {
      TimeSeries raw = parse_metric_csv(read_file(data_path));
      TrainOutput out = run_train(raw, cfg);
      save_checkpoint(model_path, out.checkpoint);
      if (!out_path.empty()) {
        std::string loss_csv = "epoch,loss\n";
        char buf[64];
        for (std::size_t i = 0; i < out.epoch_losses.size(); ++i) {
          std::snprintf(buf, sizeof(buf), "%zu,%.10g\n", i + 1, out.epoch_losses[i]);
          loss_csv += buf;
        }
        write_file(out_path, loss_csv);
      }
      Eigen::Index window_count =
          (out.train_points - cfg.model.window_length) / cfg.train_stride + 1;
      if (out.epoch_losses.empty()) {
        std::printf("trained 0 epochs on %lld points (%lld windows); saved %s\n",
                    static_cast<long long>(out.train_points),
                    static_cast<long long>(window_count), model_path.c_str());
      } else {
        std::printf("trained %zu epochs on %lld points (%lld windows), final loss %.6g; "
                    "saved %s\n",
                    out.epoch_losses.size(), static_cast<long long>(out.train_points),
                    static_cast<long long>(window_count), out.epoch_losses.back(),
                    model_path.c_str());
      }
    } else if (detect_cmd->parsed()) {
      Checkpoint ckpt = load_checkpoint(model_path);
      if (interval_opt->count() > 0) {
        ckpt.interval_s = cfg.interval_s;
      }
      TimeSeries raw = parse_metric_csv(read_file(data_path));
      DetectOutput det = run_detect(raw, ckpt, cfg.likelihood);
      write_file(out_path, write_detections(det.records, det.dim_names));
      std::size_t flagged = 0;
      for (const auto& r : det.records) flagged += r.flagged ? 1 : 0;
      std::printf("wrote %zu records (%zu flagged) to %s\n", det.records.size(), flagged,
                  out_path.c_str());
    } else if (score_cmd->parsed()) {
      DetectionTable table = read_detections(read_file(data_path));
      LabelSet labels = parse_labels(read_file(labels_path));
      std::string key = resolve_label_key(labels, label_name, data_path);

      std::vector<std::int64_t> timestamps(table.records.size());
      std::vector<bool> flags(table.records.size());
      for (std::size_t i = 0; i < table.records.size(); ++i) {
        timestamps[i] = table.records[i].timestamp;
        flags[i] = table.records[i].flagged;
      }
      std::vector<ScoreProfile> profiles = select_profiles(cfg.profile);
      std::vector<ScoreReport::FileEntry> entries =
          score_detections(key, timestamps, flags, labels.at(key), cfg, profiles);
      std::vector<ScoreReport> reports;
      for (std::size_t p = 0; p < profiles.size(); ++p) {
        reports.push_back(make_report(profiles[p], {entries[p]}));
      }
      for (const ScoreReport& report : reports) {
        std::printf("%s: normalized %.4f (raw %.4f, detected %d, false positives %d, "
                    "missed %d)\n",
                    report.profile.c_str(), report.normalized, report.corpus_raw,
                    report.files[0].detected_windows, report.files[0].false_positives,
                    report.files[0].missed_windows);
      }
      if (!out_path.empty()) {
        write_file(out_path, write_report_csv(reports, report_notes(cfg)));
      }
    } else if (corpus_cmd->parsed()) {
      LabelSet labels = parse_labels(read_file(labels_path));
      CorpusResult res = run_corpus(data_path, labels, cfg, out_path + "/detections");
      write_file(out_path + "/report.csv", write_report_csv(res.reports, report_notes(cfg)));
      for (const ScoreReport& report : res.reports) {
        std::printf("%s: normalized %.4f over %zu files\n", report.profile.c_str(),
                    report.normalized, report.files.size());
      }
      for (const CorpusFileResult& f : res.files) {
        if (!f.ok) {
          std::fprintf(stderr, "anomalyd: skipped %s: %s\n", f.file.c_str(),
                       f.error.c_str());
        }
      }
      if (res.failed > 0) {
        std::fprintf(stderr, "anomalyd: %d of %zu files failed\n", res.failed,
                     res.files.size());
      }
      std::printf("report written to %s/report.csv\n", out_path.c_str());
    } else if (plot_cmd->parsed()) {
      DetectionTable table = read_detections(read_file(data_path));
      write_file(out_path, render_detection_svg(table, 1.0 - cfg.likelihood.epsilon));
      std::printf("wrote plot of %zu records to %s\n", table.records.size(),
                  out_path.c_str());
    }
  } catch (const IoError& e) {
    std::fprintf(stderr, "anomalyd: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "anomalyd: %s\n", e.what());
    return 1;
  }
  return 0;
}
