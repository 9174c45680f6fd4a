#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anomaly/ingest.hpp"
#include "anomaly/timeseries.hpp"

namespace fixtures {

// Sinusoid plus Gaussian noise, one sample every interval_s seconds.
// Timestamps start at a bucket-aligned epoch so aggregation is the identity.
anomaly::TimeSeries sine_series(int points, double period_points, double amplitude,
                                double base, double noise_sigma, std::uint64_t seed,
                                std::int64_t interval_s = 300);

// Adds `delta` to dimension 0 from index `start` to the end.
void level_shift(anomaly::TimeSeries& series, int start, double delta);

// Adds independent Gaussian noise to dimension 0 from index `start` on.
void noise_burst(anomaly::TimeSeries& series, int start, double sigma,
                 std::uint64_t seed);

std::string to_csv(const anomaly::TimeSeries& series);

// Six single-dimension files, each with a one-point glitch (a clipped spike
// that dominates the raw error scale) followed by the labeled anomaly: a
// level shift onto a noisier regime.
struct MiniCorpus {
  std::vector<std::string> names;
  std::vector<std::string> csv;  // parallel to names
  anomaly::LabelSet labels;
};
MiniCorpus mini_corpus(std::uint64_t seed);

}  // namespace fixtures
