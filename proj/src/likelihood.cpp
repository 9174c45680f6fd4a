#include "anomaly/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace anomaly {

namespace {

// Keeps likelihoods strictly inside (0, 1); erfc underflows to 0 for large
// arguments, which would otherwise yield exactly 1.
constexpr double kLikelihoodMargin = 1e-15;

double span_mean(const double* begin, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += begin[i];
  return sum / static_cast<double>(n);
}

double span_std(const double* begin, std::size_t n, double sigma_floor) {
  if (n < 2) return sigma_floor;
  double mean = span_mean(begin, n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = begin[i] - mean;
    sum += d * d;
  }
  return std::max(sigma_floor, std::sqrt(sum / static_cast<double>(n - 1)));
}

}  // namespace

void validate(const LikelihoodConfig& config) {
  if (config.short_window < 1) {
    throw std::invalid_argument("likelihood config: short_window must be >= 1");
  }
  if (config.long_window < config.short_window) {
    throw std::invalid_argument("likelihood config: long_window (" +
                                std::to_string(config.long_window) +
                                ") must be >= short_window (" +
                                std::to_string(config.short_window) + ")");
  }
  if (!(config.epsilon > 0.0) || !(config.epsilon < 1.0)) {
    throw std::invalid_argument("likelihood config: epsilon must be in (0, 1)");
  }
  if (!(config.sigma_floor > 0.0)) {
    throw std::invalid_argument("likelihood config: sigma_floor must be > 0");
  }
}

double rolling_mean(const std::vector<double>& s, int window, int t) {
  if (window < 1 || t < 0 || static_cast<std::size_t>(t) >= s.size()) {
    throw std::invalid_argument("rolling_mean: index out of range");
  }
  const int n = std::min(window, t + 1);
  return span_mean(s.data() + (t + 1 - n), static_cast<std::size_t>(n));
}

double rolling_std(const std::vector<double>& s, int window, int t, double sigma_floor) {
  if (window < 1 || t < 0 || static_cast<std::size_t>(t) >= s.size()) {
    throw std::invalid_argument("rolling_std: index out of range");
  }
  const int n = std::min(window, t + 1);
  return span_std(s.data() + (t + 1 - n), static_cast<std::size_t>(n), sigma_floor);
}

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double anomaly_likelihood(double mean_short, double mean_long, double stddev) {
  if (!(stddev > 0.0)) {
    throw std::invalid_argument("anomaly_likelihood: stddev must be > 0");
  }
  double l = 1.0 - q_function((mean_short - mean_long) / stddev);
  return std::clamp(l, kLikelihoodMargin, 1.0 - kLikelihoodMargin);
}

std::vector<bool> threshold_flags(const std::vector<double>& likelihood, double epsilon) {
  std::vector<bool> flags(likelihood.size());
  const double threshold = 1.0 - epsilon;
  for (std::size_t i = 0; i < likelihood.size(); ++i) {
    flags[i] = likelihood[i] >= threshold;
  }
  return flags;
}

LikelihoodEvaluator::LikelihoodEvaluator(const LikelihoodConfig& config) : config_(config) {
  validate(config);
  recent_.reserve(static_cast<std::size_t>(config.long_window));
}

LikelihoodEvaluator::Point LikelihoodEvaluator::push(double error) {
  if (recent_.size() == static_cast<std::size_t>(config_.long_window)) {
    recent_.erase(recent_.begin());
  }
  recent_.push_back(error);
  const std::size_t t = seen_++;

  Point p;
  p.mean_long = span_mean(recent_.data(), recent_.size());
  p.stddev_long = span_std(recent_.data(), recent_.size(), config_.sigma_floor);
  const std::size_t n_short =
      std::min(recent_.size(), static_cast<std::size_t>(config_.short_window));
  p.mean_short = span_mean(recent_.data() + (recent_.size() - n_short), n_short);

  if (t + 1 < static_cast<std::size_t>(config_.short_window)) {
    p.likelihood = 0.5;
    p.flagged = false;
  } else {
    p.likelihood = anomaly_likelihood(p.mean_short, p.mean_long, p.stddev_long);
    p.flagged = p.likelihood >= 1.0 - config_.epsilon;
  }
  return p;
}

LikelihoodSeries likelihood_series(const ErrorSeries& errors, const LikelihoodConfig& config) {
  LikelihoodEvaluator evaluator(config);
  LikelihoodSeries out;
  const std::size_t n = errors.errors.size();
  if (errors.timestamps.size() != n) {
    throw std::invalid_argument("likelihood_series: " + std::to_string(errors.timestamps.size()) +
                                " timestamps for " + std::to_string(n) + " errors");
  }
  out.timestamps = errors.timestamps;
  out.mean_long.reserve(n);
  out.stddev_long.reserve(n);
  out.mean_short.reserve(n);
  out.likelihood.reserve(n);
  out.flags.reserve(n);
  for (double e : errors.errors) {
    LikelihoodEvaluator::Point p = evaluator.push(e);
    out.mean_long.push_back(p.mean_long);
    out.stddev_long.push_back(p.stddev_long);
    out.mean_short.push_back(p.mean_short);
    out.likelihood.push_back(p.likelihood);
    out.flags.push_back(p.flagged);
  }
  return out;
}

}  // namespace anomaly
