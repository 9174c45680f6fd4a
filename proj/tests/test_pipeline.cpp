#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "anomaly/pipeline.hpp"
#include "anomaly/svgplot.hpp"
#include "fixtures.hpp"

using namespace anomaly;

namespace {

struct TempDir {
  std::filesystem::path path;

  TempDir() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("anomalyd-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string str(const std::string& rel) const { return (path / rel).string(); }
};

RunConfig fast_config() {
  RunConfig cfg;
  cfg.model.window_length = 12;
  cfg.model.hidden_size = 4;
  cfg.model.epochs = 3;
  cfg.model.batch_size = 8;
  cfg.model.rng_seed = 21;
  cfg.train_fraction = 0.3;
  return cfg;
}

const TimeSeries& test_sine() {
  static TimeSeries s = fixtures::sine_series(400, 48.0, 1.0, 10.0, 0.02, 7);
  return s;
}

const TrainOutput& trained_output() {
  static TrainOutput out = run_train(test_sine(), fast_config());
  return out;
}

Checkpoint sample_checkpoint() {
  AutoencoderConfig cfg;
  cfg.input_dim = 2;
  cfg.hidden_size = 3;
  cfg.window_length = 5;
  cfg.learning_rate = 0.00125;
  cfg.epochs = 7;
  cfg.batch_size = 3;
  cfg.rng_seed = 42;
  cfg.clip_norm = 2.5;

  Checkpoint ckpt;
  ckpt.model = init_model(cfg);
  Eigen::VectorXd flat = pack_parameters(ckpt.model);
  flat[0] = 0.0;
  flat[1] = 5e-324;  // subnormal survives the text round trip
  flat[2] = -1e300;
  flat[3] = std::acos(-1.0);
  unpack_parameters(flat, ckpt.model);
  ckpt.norm.min = Eigen::Vector2d(-3.5, 0.1);
  ckpt.norm.max = Eigen::Vector2d(12.25, 0.9);
  ckpt.dim_names = {"cpu load average", "requests per second"};
  ckpt.interval_s = 600;
  ckpt.fill_value = -7.25;
  return ckpt;
}

std::string replace_once(std::string text, const std::string& from, const std::string& to) {
  std::size_t pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, from.size(), to);
  return text;
}

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
  std::size_t count = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const TempDir& tmp, const std::string& args) {
  static int counter = 0;
  std::string out_path = tmp.str(".cli-out-" + std::to_string(counter));
  std::string err_path = tmp.str(".cli-err-" + std::to_string(counter));
  ++counter;
  std::string cmd =
      std::string(ANOMALYD_BIN) + " " + args + " >" + out_path + " 2>" + err_path;
  int status = std::system(cmd.c_str());
  CliResult r;
  if (WIFEXITED(status)) r.exit_code = WEXITSTATUS(status);
  r.out = read_file(out_path);
  r.err = read_file(err_path);
  return r;
}

}  // namespace

TEST_CASE("checkpoints survive the text round trip bit for bit") {
  Checkpoint ckpt = sample_checkpoint();
  std::string text = encode_checkpoint(ckpt);
  Checkpoint back = decode_checkpoint(text);

  CHECK(back.model.config.input_dim == 2);
  CHECK(back.model.config.hidden_size == 3);
  CHECK(back.model.config.window_length == 5);
  CHECK(back.model.config.learning_rate == 0.00125);
  CHECK(back.model.config.epochs == 7);
  CHECK(back.model.config.batch_size == 3);
  CHECK(back.model.config.rng_seed == 42);
  CHECK(back.model.config.clip_norm == 2.5);
  CHECK(back.interval_s == 600);
  CHECK(back.fill_value == -7.25);
  CHECK(back.dim_names == ckpt.dim_names);
  CHECK((back.norm.min.array() == ckpt.norm.min.array()).all());
  CHECK((back.norm.max.array() == ckpt.norm.max.array()).all());
  CHECK((pack_parameters(back.model).array() == pack_parameters(ckpt.model).array()).all());

  // Re-encoding reproduces the same bytes.
  CHECK(encode_checkpoint(back) == text);
}

TEST_CASE("decode_checkpoint rejects malformed input") {
  std::string text = encode_checkpoint(sample_checkpoint());

  CHECK_THROWS_AS(decode_checkpoint("junk\n"), ParseError);
  CHECK_THROWS_AS(decode_checkpoint(text.substr(0, 40)), ParseError);
  CHECK_THROWS_WITH_AS(decode_checkpoint(replace_once(text, "interval 600", "interval abc")),
                       doctest::Contains("malformed integer"), ParseError);

  Eigen::Index n = parameter_count(sample_checkpoint().model);
  std::string wrong_count = replace_once(text, "params " + std::to_string(n), "params 3");
  CHECK_THROWS_WITH_AS(decode_checkpoint(wrong_count), doctest::Contains("parameters"),
                       ParseError);

  // Text ends with "end\n"; dropping it leaves the stream short.
  CHECK_THROWS_WITH_AS(decode_checkpoint(text.substr(0, text.size() - 4)),
                       doctest::Contains("unexpected end"), ParseError);
}

TEST_CASE("save_checkpoint creates directories; load reports missing files") {
  TempDir tmp;
  Checkpoint ckpt = sample_checkpoint();
  save_checkpoint(tmp.str("sub/dir/model.ckpt"), ckpt);
  Checkpoint back = load_checkpoint(tmp.str("sub/dir/model.ckpt"));
  CHECK((pack_parameters(back.model).array() == pack_parameters(ckpt.model).array()).all());

  CHECK_THROWS_AS(load_checkpoint(tmp.str("missing.ckpt")), IoError);
  CHECK_THROWS_AS(read_file(tmp.str("nope")), IoError);
}

TEST_CASE("run_train fits on the leading fraction and is deterministic") {
  const TrainOutput& out = trained_output();
  CHECK(out.train_points == 120);  // floor(0.3 * 400)
  CHECK(out.epoch_losses.size() == 3);
  CHECK(out.checkpoint.model.config.input_dim == 1);
  CHECK(out.checkpoint.dim_names == std::vector<std::string>{"value"});
  CHECK(out.checkpoint.interval_s == 300);
  CHECK(out.checkpoint.norm.min[0] < out.checkpoint.norm.max[0]);
  for (double loss : out.epoch_losses) {
    CHECK(std::isfinite(loss));
    CHECK(loss >= 0.0);
  }

  TrainOutput again = run_train(test_sine(), fast_config());
  CHECK(encode_checkpoint(again.checkpoint) == encode_checkpoint(out.checkpoint));
}

TEST_CASE("run_train validates its inputs") {
  CHECK_THROWS_WITH_AS(run_train(TimeSeries{}, fast_config()), doctest::Contains("empty"),
                       std::invalid_argument);

  RunConfig tiny = fast_config();
  tiny.train_fraction = 0.02;  // 8 points for a 12-point window
  CHECK_THROWS_WITH_AS(run_train(test_sine(), tiny), doctest::Contains("shorter than"),
                       std::invalid_argument);
}

TEST_CASE("run_detect aligns records with the aggregated series") {
  RunConfig cfg = fast_config();
  DetectOutput det = run_detect(test_sine(), trained_output().checkpoint, cfg.likelihood);

  const Eigen::Index window = cfg.model.window_length;
  REQUIRE(static_cast<Eigen::Index>(det.records.size()) == test_sine().size() - window + 1);
  CHECK(det.records.front().timestamp ==
        test_sine().timestamps[static_cast<std::size_t>(window - 1)]);
  CHECK(det.records.back().timestamp == test_sine().timestamps.back());
  CHECK(det.dim_names == std::vector<std::string>{"value"});
  CHECK(det.errors.errors.size() == det.records.size());
  CHECK(det.likelihood.likelihood.size() == det.records.size());

  // Raw values are the unnormalized aggregated inputs at the window end.
  for (std::size_t i = 0; i < det.records.size(); i += 37) {
    Eigen::Index row = window - 1 + static_cast<Eigen::Index>(i);
    CHECK(det.records[i].raw_values[0] == test_sine().values(row, 0));
    CHECK(det.records[i].error >= 0.0);
    CHECK(std::isfinite(det.records[i].likelihood));
  }
}

TEST_CASE("run_detect rejects a series whose width differs from the checkpoint") {
  TimeSeries two_dim;
  two_dim.dim_names = {"a", "b"};
  two_dim.values = Eigen::MatrixXd::Zero(60, 2);
  for (int i = 0; i < 60; ++i) two_dim.timestamps.push_back(i * 300);

  CHECK_THROWS_WITH_AS(
      run_detect(two_dim, trained_output().checkpoint, LikelihoodConfig{}),
      doctest::Contains("dimensions"), std::invalid_argument);
}

TEST_CASE("a constant series never raises a flag") {
  TimeSeries flat;
  flat.dim_names = {"value"};
  flat.values = Eigen::MatrixXd::Constant(200, 1, 5.0);
  for (int i = 0; i < 200; ++i) flat.timestamps.push_back(i * 300);

  RunConfig cfg = fast_config();
  cfg.model.window_length = 8;
  cfg.model.hidden_size = 3;
  cfg.model.epochs = 2;

  TrainOutput trained = run_train(flat, cfg);
  DetectOutput det = run_detect(flat, trained.checkpoint, cfg.likelihood);
  for (const DetectionRecord& r : det.records) {
    // The two rolling means accumulate over different lengths, so they can
    // differ from the constant by a few ulps each.
    CHECK(r.likelihood == doctest::Approx(0.5).epsilon(1e-6));
    CHECK_FALSE(r.flagged);
  }
}

TEST_CASE("select_profiles resolves names and rejects unknowns") {
  CHECK(select_profiles("all").size() == 3);
  CHECK(select_profiles("standard").size() == 1);
  CHECK(select_profiles("standard")[0].name == "standard");
  CHECK(select_profiles("low-fp")[0].fp_weight == 0.22);
  CHECK(select_profiles("low-fn")[0].fn_weight == 2.0);
  CHECK_THROWS_AS(select_profiles("bogus"), std::invalid_argument);
}

TEST_CASE("score_detections matches direct window scoring") {
  std::vector<std::int64_t> ts;
  for (int i = 0; i < 100; ++i) ts.push_back(i);
  std::vector<bool> flags(100, false);
  flags[40] = true;

  RunConfig cfg;  // window_fraction 0.10, probation_fraction 0.15
  std::vector<ScoreProfile> profiles = all_profiles();
  std::vector<ScoreReport::FileEntry> entries =
      score_detections("f", ts, flags, {40}, cfg, profiles);
  REQUIRE(entries.size() == 3);

  TimeSeries support;
  support.timestamps = ts;
  support.values = Eigen::MatrixXd::Zero(100, 1);
  AnomalyWindowSet windows = build_windows({40}, support, 0.10, 0.15);
  std::vector<bool> best = perfect_flags(ts, windows);
  std::vector<bool> none(100, false);

  for (std::size_t p = 0; p < profiles.size(); ++p) {
    CHECK(entries[p].raw == score_file(ts, flags, windows, profiles[p]).raw);
    CHECK(entries[p].perfect_raw == score_file(ts, best, windows, profiles[p]).raw);
    CHECK(entries[p].null_raw == score_file(ts, none, windows, profiles[p]).raw);
    CHECK(entries[p].detected_windows == 1);
    CHECK(entries[p].missed_windows == 0);
  }
}

TEST_CASE("run_corpus scores every readable file and records failures") {
  TempDir tmp;
  LabelSet labels;
  for (int f = 0; f < 2; ++f) {
    TimeSeries s = fixtures::sine_series(240, 48.0, 1.0, 10.0, 0.05,
                                         31 + static_cast<std::uint64_t>(f));
    fixtures::level_shift(s, 180, 1.0);
    std::string name = std::string(f == 0 ? "a" : "b") + ".csv";
    write_file(tmp.str("data/" + name), fixtures::to_csv(s));
    labels[name] = {s.timestamps[180]};
  }
  write_file(tmp.str("data/bad.csv"), "timestamp,value\ngarbage\n");
  labels["bad.csv"] = {0};

  RunConfig cfg = fast_config();
  cfg.model.window_length = 8;
  cfg.model.hidden_size = 3;
  cfg.model.epochs = 2;
  cfg.model.rng_seed = 5;
  cfg.jobs = 2;

  CorpusResult res = run_corpus(tmp.str("data"), labels, cfg, tmp.str("det"));
  REQUIRE(res.files.size() == 3);
  CHECK(res.failed == 1);
  CHECK(res.files[0].ok);
  CHECK(res.files[1].ok);
  CHECK_FALSE(res.files[2].ok);
  CHECK(res.files[2].error.find("line 2") != std::string::npos);
  REQUIRE(res.reports.size() == 3);
  for (const ScoreReport& report : res.reports) {
    CHECK(report.files.size() == 2);
  }

  CHECK(std::filesystem::exists(tmp.str("det/a.csv")));
  CHECK(std::filesystem::exists(tmp.str("det/b.csv")));
  CHECK_FALSE(std::filesystem::exists(tmp.str("det/bad.csv")));
  DetectionTable table = read_detections(read_file(tmp.str("det/a.csv")));
  CHECK(table.records.size() == 240 - 8 + 1);

  // Same inputs, single thread: identical reports.
  RunConfig serial = cfg;
  serial.jobs = 1;
  CorpusResult again = run_corpus(tmp.str("data"), labels, serial, "");
  CHECK(write_report_csv(again.reports, {}) == write_report_csv(res.reports, {}));

  CHECK_THROWS_AS(run_corpus(tmp.str("data"), LabelSet{}, cfg, ""), std::invalid_argument);
}

TEST_CASE("render_detection_svg draws one panel per dimension plus the score panel") {
  DetectionTable t;
  t.dim_names = {"value"};
  for (int i = 0; i < 3; ++i) {
    DetectionRecord r;
    r.timestamp = i * 300;
    r.raw_values = {1.0 + i};
    r.error = 0.1 * (i + 1);
    r.likelihood = i == 2 ? 0.97 : 0.4;
    r.flagged = i == 2;
    t.records.push_back(r);
  }

  std::string svg = render_detection_svg(t, 0.9563);
  CHECK(svg.rfind("<svg xmlns", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(count_occurrences(svg, "<polyline") == 3);  // values, error, likelihood
  CHECK(count_occurrences(svg, "#d62728") == 1);    // one flagged point
  CHECK(svg.find("stroke-dasharray") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);

  // A single record degrades to point markers.
  DetectionTable single;
  single.dim_names = {"value"};
  single.records = {t.records[0]};
  std::string svg1 = render_detection_svg(single, 0.9563);
  CHECK(svg1.find("<polyline") == std::string::npos);
  CHECK(svg1.find("<circle") != std::string::npos);

  // Constant values must not divide the panel range away.
  DetectionTable constant = t;
  for (auto& r : constant.records) {
    r.raw_values = {2.0};
    r.error = 0.0;
    r.likelihood = 0.5;
    r.flagged = false;
  }
  CHECK(render_detection_svg(constant, 0.9563).find("nan") == std::string::npos);

  CHECK_THROWS_AS(render_detection_svg(DetectionTable{}, 0.5), std::invalid_argument);
}

TEST_CASE("command line round trip: train, detect, score, plot") {
  TempDir tmp;
  unsetenv("ANOMALYD_SEED");

  TimeSeries raw = fixtures::sine_series(400, 48.0, 1.0, 10.0, 0.02, 11);
  write_file(tmp.str("data.csv"), fixtures::to_csv(raw));
  write_file(tmp.str("labels.json"),
             "{\"data.csv\": [" + std::to_string(raw.timestamps[300]) + "]}");

  const std::string hp = " --window 12 --hidden 4 --epochs 3 --batch 8 --train-fraction 0.3";

  CliResult train1 = run_cli(tmp, "train --data " + tmp.str("data.csv") + " --model " +
                                      tmp.str("m1.ckpt") + " --out " + tmp.str("loss.csv") +
                                      hp + " --seed 21");
  CAPTURE(train1.err);
  REQUIRE(train1.exit_code == 0);
  CHECK(train1.out.find("trained 3 epochs") != std::string::npos);
  std::string loss_csv = read_file(tmp.str("loss.csv"));
  CHECK(loss_csv.rfind("epoch,loss\n", 0) == 0);
  CHECK(count_occurrences(loss_csv, "\n") == 4);

  // Same seed, same bytes; different seed, different bytes.
  CliResult train2 = run_cli(tmp, "train --data " + tmp.str("data.csv") + " --model " +
                                      tmp.str("m2.ckpt") + hp + " --seed 21");
  REQUIRE(train2.exit_code == 0);
  CHECK(read_file(tmp.str("m1.ckpt")) == read_file(tmp.str("m2.ckpt")));
  CliResult train3 = run_cli(tmp, "train --data " + tmp.str("data.csv") + " --model " +
                                      tmp.str("m3.ckpt") + hp + " --seed 22");
  REQUIRE(train3.exit_code == 0);
  CHECK(read_file(tmp.str("m1.ckpt")) != read_file(tmp.str("m3.ckpt")));

  // The seed can come from the environment instead.
  setenv("ANOMALYD_SEED", "21", 1);
  CliResult train_env = run_cli(tmp, "train --data " + tmp.str("data.csv") + " --model " +
                                         tmp.str("m4.ckpt") + hp);
  unsetenv("ANOMALYD_SEED");
  REQUIRE(train_env.exit_code == 0);
  CHECK(read_file(tmp.str("m1.ckpt")) == read_file(tmp.str("m4.ckpt")));

  // Config file supplies hyperparameters; explicit flags beat it.
  write_file(tmp.str("run.cfg"),
             "# comment\nhidden=6\nseed = 21\nepochs=2\nwindow=12\nbatch=8\n"
             "train-fraction=0.3\n");
  CliResult train_cfg = run_cli(tmp, "train --config " + tmp.str("run.cfg") + " --data " +
                                         tmp.str("data.csv") + " --model " +
                                         tmp.str("m5.ckpt") + " --hidden 4");
  REQUIRE(train_cfg.exit_code == 0);
  Checkpoint from_cfg = load_checkpoint(tmp.str("m5.ckpt"));
  CHECK(from_cfg.model.config.hidden_size == 4);  // flag overrides config
  CHECK(from_cfg.model.config.epochs == 2);
  CHECK(from_cfg.model.config.rng_seed == 21);

  CliResult bad_cfg = run_cli(tmp, "train --config " + tmp.str("labels.json") + " --data " +
                                       tmp.str("data.csv") + " --model " + tmp.str("x.ckpt"));
  CHECK(bad_cfg.exit_code == 2);

  CliResult detect = run_cli(tmp, "detect --data " + tmp.str("data.csv") + " --model " +
                                      tmp.str("m1.ckpt") + " --out " + tmp.str("det.csv"));
  CAPTURE(detect.err);
  REQUIRE(detect.exit_code == 0);
  DetectionTable table = read_detections(read_file(tmp.str("det.csv")));
  CHECK(table.records.size() == 400 - 12 + 1);
  CHECK(table.records.front().timestamp == raw.timestamps[11]);

  // --interval overrides the checkpoint's aggregation at detect time.
  CliResult coarse = run_cli(tmp, "detect --data " + tmp.str("data.csv") + " --model " +
                                      tmp.str("m1.ckpt") + " --out " + tmp.str("det600.csv") +
                                      " --interval 600");
  REQUIRE(coarse.exit_code == 0);
  CHECK(read_detections(read_file(tmp.str("det600.csv"))).records.size() == 200 - 12 + 1);

  CliResult score = run_cli(tmp, "score --data " + tmp.str("det.csv") + " --labels " +
                                     tmp.str("labels.json") + " --out " + tmp.str("report.csv"));
  CAPTURE(score.err);
  REQUIRE(score.exit_code == 0);
  CHECK(score.out.find("standard:") != std::string::npos);
  std::string report = read_file(tmp.str("report.csv"));
  CHECK(report.find("standard,ALL,") != std::string::npos);

  CliResult named = run_cli(tmp, "score --data " + tmp.str("det.csv") + " --labels " +
                                     tmp.str("labels.json") + " --name data.csv");
  CHECK(named.exit_code == 0);
  CliResult unnamed = run_cli(tmp, "score --data " + tmp.str("det.csv") + " --labels " +
                                       tmp.str("labels.json") + " --name nope.csv");
  CHECK(unnamed.exit_code == 1);

  CliResult plot = run_cli(tmp, "plot --data " + tmp.str("det.csv") + " --out " +
                                    tmp.str("plot.svg"));
  REQUIRE(plot.exit_code == 0);
  std::string svg = read_file(tmp.str("plot.svg"));
  CHECK(svg.rfind("<svg xmlns", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("command line reports errors with distinct exit codes") {
  TempDir tmp;
  unsetenv("ANOMALYD_SEED");

  // Missing input file: I/O failure.
  CliResult missing = run_cli(tmp, "train --data " + tmp.str("absent.csv") + " --model " +
                                       tmp.str("m.ckpt"));
  CHECK(missing.exit_code == 2);

  // Well-formed but too short for the default 48-point window: domain error.
  TimeSeries tiny = fixtures::sine_series(30, 12.0, 1.0, 10.0, 0.01, 3);
  write_file(tmp.str("tiny.csv"), fixtures::to_csv(tiny));
  CliResult shorty = run_cli(tmp, "train --data " + tmp.str("tiny.csv") + " --model " +
                                      tmp.str("m.ckpt"));
  CHECK(shorty.exit_code == 1);
  CHECK(shorty.err.find("shorter than") != std::string::npos);

  CliResult unknown = run_cli(tmp, "train --data " + tmp.str("tiny.csv") + " --model " +
                                       tmp.str("m.ckpt") + " --bogus");
  CHECK(unknown.exit_code == 2);

  CliResult help = run_cli(tmp, "--help");
  CHECK(help.exit_code == 0);
  CHECK(help.out.find("train") != std::string::npos);
}

TEST_CASE("command line corpus run writes a report and names failed files") {
  TempDir tmp;
  unsetenv("ANOMALYD_SEED");

  LabelSet labels;
  std::string labels_json = "{";
  for (int f = 0; f < 2; ++f) {
    TimeSeries s = fixtures::sine_series(240, 48.0, 1.0, 10.0, 0.05,
                                         51 + static_cast<std::uint64_t>(f));
    fixtures::level_shift(s, 180, 1.0);
    std::string name = std::string(f == 0 ? "a" : "b") + ".csv";
    write_file(tmp.str("corpus/" + name), fixtures::to_csv(s));
    labels_json += (f ? "," : "") + std::string("\"") + name +
                   "\": [" + std::to_string(s.timestamps[180]) + "]";
  }
  write_file(tmp.str("corpus/bad.csv"), "timestamp,value\ngarbage\n");
  labels_json += ",\"bad.csv\": [0]}";
  write_file(tmp.str("clabels.json"), labels_json);

  CliResult corpus = run_cli(
      tmp, "run-corpus --data " + tmp.str("corpus") + " --labels " + tmp.str("clabels.json") +
               " --out " + tmp.str("out") +
               " --window 8 --hidden 3 --epochs 2 --batch 8 --train-fraction 0.3"
               " --jobs 2 --seed 5");
  CAPTURE(corpus.err);
  REQUIRE(corpus.exit_code == 0);
  CHECK(corpus.out.find("standard: normalized") != std::string::npos);
  CHECK(corpus.err.find("skipped bad.csv") != std::string::npos);
  CHECK(std::filesystem::exists(tmp.str("out/report.csv")));
  CHECK(std::filesystem::exists(tmp.str("out/detections/a.csv")));
  CHECK(std::filesystem::exists(tmp.str("out/detections/b.csv")));

  std::string report = read_file(tmp.str("out/report.csv"));
  CHECK(report.find("profile,file,raw,") != std::string::npos);
  CHECK(count_occurrences(report, ",ALL,") == 3);
}
