#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "anomaly/timeseries.hpp"

namespace anomaly {

// Error raised for malformed input text. `line` is 1-based and 0 when the
// failure cannot be tied to a specific line.
struct ParseError : std::runtime_error {
  int line;
  ParseError(const std::string& msg, int line_no)
      : std::runtime_error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg
                                       : msg),
        line(line_no) {}
};

// Anomaly label timestamps keyed by relative file path, sorted ascending.
using LabelSet = std::map<std::string, std::vector<std::int64_t>>;

// One detector output row.
struct DetectionRecord {
  std::int64_t timestamp = 0;
  std::vector<double> raw_values;  // original (unnormalized) inputs
  double error = 0.0;
  double likelihood = 0.0;
  bool flagged = false;
};

struct DetectionTable {
  std::vector<DetectionRecord> records;
  std::vector<std::string> dim_names;
};

// Accepts integer epoch seconds or "YYYY-MM-DD hh:mm:ss" (an optional
// fractional-second suffix is ignored). Interpreted as UTC.
std::int64_t parse_timestamp(const std::string& token);

// Parses a metric CSV whose header starts with a `timestamp` column; every
// further column is a metric dimension. Rows are sorted by timestamp.
// Duplicate timestamps and malformed cells raise ParseError naming the line.
TimeSeries parse_metric_csv(const std::string& text);

// Parses a combined-labels JSON document: an object mapping relative file
// paths to arrays of anomaly timestamps.
LabelSet parse_labels(const std::string& text);

// Serializes detections as CSV with header
// `timestamp,<dim...>,error,likelihood,flagged`; reals carry 10 significant
// digits, flags are 1/0 and lines end with "\n".
std::string write_detections(const std::vector<DetectionRecord>& records,
                             const std::vector<std::string>& dim_names);

// Inverse of write_detections.
DetectionTable read_detections(const std::string& text);

}  // namespace anomaly
