#pragma once

#include <cstdint>
#include <vector>

#include "anomaly/nn.hpp"

namespace anomaly {

struct LikelihoodConfig {
  int long_window = 500;    // sample count for the baseline mean/stddev
  int short_window = 10;    // sample count for the recent mean
  double epsilon = 0.0437;  // flag when likelihood >= 1 - epsilon
  double sigma_floor = 1e-6;
};

// Throws std::invalid_argument on inconsistent settings.
void validate(const LikelihoodConfig& config);

struct LikelihoodSeries {
  std::vector<std::int64_t> timestamps;
  std::vector<double> mean_long;
  std::vector<double> stddev_long;
  std::vector<double> mean_short;
  std::vector<double> likelihood;
  std::vector<bool> flags;
};

// Mean of s[max(0, t-window+1) .. t], summed in chronological order.
double rolling_mean(const std::vector<double>& s, int window, int t);

// Sample standard deviation (n - 1 denominator) over the same span, floored
// at sigma_floor. Spans with fewer than two points return sigma_floor.
double rolling_std(const std::vector<double>& s, int window, int t, double sigma_floor);

// Gaussian tail probability Q(x) = P(N(0,1) > x).
double q_function(double x);

// Likelihood that the recent error mean is anomalously high against the
// baseline: 1 - Q((mean_short - mean_long) / stddev). Clamped inside (0, 1).
double anomaly_likelihood(double mean_short, double mean_long, double stddev);

std::vector<bool> threshold_flags(const std::vector<double>& likelihood, double epsilon);

// Streaming evaluator over an error sequence. Keeps the last long_window
// values and recomputes both window statistics from them each step, in
// chronological order, so results match a from-scratch pass exactly.
// The first short_window - 1 points are warm-up: likelihood 0.5, never
// flagged.
class LikelihoodEvaluator {
 public:
  explicit LikelihoodEvaluator(const LikelihoodConfig& config);

  struct Point {
    double mean_long;
    double stddev_long;
    double mean_short;
    double likelihood;
    bool flagged;
  };

  Point push(double error);

 private:
  LikelihoodConfig config_;
  std::vector<double> recent_;  // oldest first, at most long_window entries
  std::size_t seen_ = 0;
};

// Runs the evaluator over the whole error series.
LikelihoodSeries likelihood_series(const ErrorSeries& errors, const LikelihoodConfig& config);

}  // namespace anomaly
