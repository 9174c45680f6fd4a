#include "anomaly/timeseries.hpp"

#include <algorithm>
#include <stdexcept>

namespace anomaly {

void validate(const TimeSeries& series) {
  if (series.values.rows() != series.size()) {
    throw std::invalid_argument("time series has " + std::to_string(series.values.rows()) +
                                " value rows for " + std::to_string(series.size()) +
                                " timestamps");
  }
  if (!series.dim_names.empty() &&
      static_cast<Eigen::Index>(series.dim_names.size()) != series.dims()) {
    throw std::invalid_argument("time series has " + std::to_string(series.dim_names.size()) +
                                " dimension names for " + std::to_string(series.dims()) +
                                " dimensions");
  }
  for (std::size_t i = 1; i < series.timestamps.size(); ++i) {
    if (series.timestamps[i] <= series.timestamps[i - 1]) {
      throw std::invalid_argument("timestamps not strictly increasing at index " +
                                  std::to_string(i));
    }
  }
}

NormalizationParams minmax_fit(const TimeSeries& series) {
  if (series.empty()) {
    throw std::invalid_argument("minmax_fit: empty series");
  }
  NormalizationParams params;
  params.min = series.values.colwise().minCoeff();
  params.max = series.values.colwise().maxCoeff();
  return params;
}

TimeSeries minmax_apply(const TimeSeries& series, const NormalizationParams& params) {
  if (series.dims() != params.min.size() || series.dims() != params.max.size()) {
    throw std::invalid_argument("minmax_apply: series has " + std::to_string(series.dims()) +
                                " dimensions, parameters have " +
                                std::to_string(params.min.size()));
  }
  TimeSeries out = series;
  for (Eigen::Index d = 0; d < series.dims(); ++d) {
    double lo = params.min[d];
    double range = params.max[d] - lo;
    for (Eigen::Index i = 0; i < series.size(); ++i) {
      double v = series.values(i, d);
      out.values(i, d) = range == 0.0
                             ? 0.0
                             : std::clamp((v - lo) / range, 0.0, 1.0);
    }
  }
  return out;
}

TimeSeries minmax_invert(const TimeSeries& series, const NormalizationParams& params) {
  if (series.dims() != params.min.size() || series.dims() != params.max.size()) {
    throw std::invalid_argument("minmax_invert: series has " + std::to_string(series.dims()) +
                                " dimensions, parameters have " +
                                std::to_string(params.min.size()));
  }
  TimeSeries out = series;
  for (Eigen::Index d = 0; d < series.dims(); ++d) {
    double lo = params.min[d];
    double range = params.max[d] - lo;
    for (Eigen::Index i = 0; i < series.size(); ++i) {
      out.values(i, d) = lo + series.values(i, d) * range;
    }
  }
  return out;
}

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

}  // namespace

TimeSeries aggregate(const TimeSeries& series, std::int64_t interval_s,
                     const Eigen::VectorXd& fill) {
  validate(series);
  if (interval_s < 0) {
    throw std::invalid_argument("aggregate: negative interval");
  }
  if (interval_s == 0 || series.empty()) {
    return series;
  }
  if (fill.size() != series.dims()) {
    throw std::invalid_argument("aggregate: fill vector has " + std::to_string(fill.size()) +
                                " entries for " + std::to_string(series.dims()) +
                                " dimensions");
  }

  std::int64_t first = floor_div(series.timestamps.front(), interval_s);
  std::int64_t last = floor_div(series.timestamps.back(), interval_s);
  Eigen::Index buckets = static_cast<Eigen::Index>(last - first + 1);

  TimeSeries out;
  out.dim_names = series.dim_names;
  out.timestamps.resize(buckets);
  out.values.setZero(buckets, series.dims());
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(buckets), 0);

  for (Eigen::Index i = 0; i < series.size(); ++i) {
    Eigen::Index b =
        static_cast<Eigen::Index>(floor_div(series.timestamps[i], interval_s) - first);
    out.values.row(b) += series.values.row(i);
    ++counts[static_cast<std::size_t>(b)];
  }
  for (Eigen::Index b = 0; b < buckets; ++b) {
    out.timestamps[static_cast<std::size_t>(b)] = (first + b) * interval_s;
    if (counts[static_cast<std::size_t>(b)] > 0) {
      out.values.row(b) /= static_cast<double>(counts[static_cast<std::size_t>(b)]);
    } else {
      out.values.row(b) = fill.transpose();
    }
  }
  return out;
}

TimeSeries aggregate(const TimeSeries& series, std::int64_t interval_s, double fill) {
  return aggregate(series, interval_s,
                   Eigen::VectorXd::Constant(series.dims(), fill));
}

WindowedDataset make_windows(const TimeSeries& series, Eigen::Index window_length,
                             Eigen::Index stride) {
  if (window_length <= 0) {
    throw std::invalid_argument("make_windows: window length must be positive");
  }
  if (stride <= 0) {
    throw std::invalid_argument("make_windows: stride must be positive");
  }
  if (series.size() < window_length) {
    throw std::invalid_argument("make_windows: series of length " +
                                std::to_string(series.size()) +
                                " is shorter than window of " +
                                std::to_string(window_length));
  }
  WindowedDataset out;
  out.window_length = window_length;
  out.stride = stride;
  Eigen::Index count = (series.size() - window_length) / stride + 1;
  out.windows.reserve(static_cast<std::size_t>(count));
  out.origins.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) {
    Eigen::Index origin = i * stride;
    out.windows.push_back(series.values.middleRows(origin, window_length));
    out.origins.push_back(origin);
  }
  return out;
}

}  // namespace anomaly
