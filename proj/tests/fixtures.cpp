#include "fixtures.hpp"

#include <cmath>
#include <cstdio>

#include "anomaly/rng.hpp"

namespace fixtures {

namespace {
// 2014-04-01 06:00:00 UTC, divisible by 300.
constexpr std::int64_t kStart = 1396332000;
}  // namespace

anomaly::TimeSeries sine_series(int points, double period_points, double amplitude,
                                double base, double noise_sigma, std::uint64_t seed,
                                std::int64_t interval_s) {
  std::mt19937_64 rng(seed);
  anomaly::TimeSeries series;
  series.dim_names = {"value"};
  series.timestamps.resize(static_cast<std::size_t>(points));
  series.values.resize(points, 1);
  for (int i = 0; i < points; ++i) {
    series.timestamps[static_cast<std::size_t>(i)] = kStart + i * interval_s;
    double phase = 2.0 * 3.14159265358979323846 * static_cast<double>(i) / period_points;
    series.values(i, 0) =
        base + amplitude * std::sin(phase) + noise_sigma * anomaly::gaussian(rng);
  }
  return series;
}

void level_shift(anomaly::TimeSeries& series, int start, double delta) {
  for (Eigen::Index i = start; i < series.size(); ++i) {
    series.values(i, 0) += delta;
  }
}

void noise_burst(anomaly::TimeSeries& series, int start, double sigma,
                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (Eigen::Index i = start; i < series.size(); ++i) {
    series.values(i, 0) += sigma * anomaly::gaussian(rng);
  }
}

std::string to_csv(const anomaly::TimeSeries& series) {
  std::string out = "timestamp";
  if (series.dim_names.empty()) {
    out += ",value";
  } else {
    for (const auto& name : series.dim_names) out += "," + name;
  }
  out += "\n";
  char buf[64];
  for (Eigen::Index i = 0; i < series.size(); ++i) {
    out += std::to_string(series.timestamps[static_cast<std::size_t>(i)]);
    for (Eigen::Index d = 0; d < series.dims(); ++d) {
      std::snprintf(buf, sizeof(buf), ",%.10g", series.values(i, d));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

MiniCorpus mini_corpus(std::uint64_t seed) {
  const int n = 1500;
  const double base = 10.0;
  const double amplitude = 1.0;
  const double noise = 0.05;
  const double shift = 0.35;
  // Long periods keep an aggregation window on a gentle arc of the cycle, so
  // the model reconstructs the normal regime with noise-level error.
  const double periods[6] = {288, 300, 320, 280, 312, 296};
  const int glitch_target[6] = {400, 450, 500, 420, 480, 460};
  const int onset[6] = {1000, 1050, 1100, 980, 1120, 1060};

  MiniCorpus corpus;
  for (int f = 0; f < 6; ++f) {
    anomaly::TimeSeries series =
        sine_series(n, periods[f], amplitude, base, noise, seed + static_cast<unsigned>(f));

    // One-point glitch at a sine trough: clipped to the top of the training
    // range at detection time, it owns the raw error maximum.
    double trough = 0.75 * periods[f];
    int glitch = static_cast<int>(
        std::llround(trough + periods[f] * std::llround((glitch_target[f] - trough) /
                                                        periods[f])));
    series.values(glitch, 0) = base + amplitude + 0.5;

    // The anomaly: the level steps up and the noise floor quintuples, so the
    // reconstruction error stays moderately elevated from the onset onward.
    level_shift(series, onset[f], shift);
    noise_burst(series, onset[f], noise * std::sqrt(24.0),
                seed + 100 + static_cast<unsigned>(f));

    std::string name = "file" + std::to_string(f) + ".csv";
    corpus.labels[name] = {series.timestamps[static_cast<std::size_t>(onset[f])]};
    corpus.names.push_back(name);
    corpus.csv.push_back(to_csv(series));
  }
  return corpus;
}

}  // namespace fixtures
