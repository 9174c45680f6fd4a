#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace anomaly {

// Uniformly sampled multi-dimensional metric stream. `values` holds one row
// per timestamp and one column per metric dimension.
struct TimeSeries {
  std::vector<std::int64_t> timestamps;
  Eigen::MatrixXd values;  // size() x dims()
  std::vector<std::string> dim_names;

  Eigen::Index size() const { return static_cast<Eigen::Index>(timestamps.size()); }
  Eigen::Index dims() const { return values.cols(); }
  bool empty() const { return timestamps.empty(); }
};

// Throws std::invalid_argument unless timestamps are strictly increasing and
// row/name counts are consistent.
void validate(const TimeSeries& series);

// Per-dimension affine rescaling fitted on training data.
struct NormalizationParams {
  Eigen::VectorXd min;
  Eigen::VectorXd max;
};

// Fixed-length windows cut from a series, each window_length x dims.
struct WindowedDataset {
  std::vector<Eigen::MatrixXd> windows;
  Eigen::Index window_length = 0;
  Eigen::Index stride = 1;
  std::vector<Eigen::Index> origins;  // source row of each window's first element
};

// Fits per-dimension min/max. Throws on an empty series.
NormalizationParams minmax_fit(const TimeSeries& series);

// Maps each dimension through (x - min) / (max - min), clamped to [0, 1].
// Degenerate dimensions (max == min) map to 0.
TimeSeries minmax_apply(const TimeSeries& series, const NormalizationParams& params);

// Inverse of minmax_apply on non-degenerate dimensions.
TimeSeries minmax_invert(const TimeSeries& series, const NormalizationParams& params);

// Buckets timestamps into [k*interval_s, (k+1)*interval_s) and averages each
// bucket. Buckets between the first and last observation that received no
// samples are emitted with `fill` values, so the output has no gaps.
// interval_s == 0 returns the input unchanged.
TimeSeries aggregate(const TimeSeries& series, std::int64_t interval_s,
                     const Eigen::VectorXd& fill);
TimeSeries aggregate(const TimeSeries& series, std::int64_t interval_s, double fill);

// Slides a window of `window_length` rows over the series with `stride`.
// Throws if the series is shorter than the window.
WindowedDataset make_windows(const TimeSeries& series, Eigen::Index window_length,
                             Eigen::Index stride);

}  // namespace anomaly
