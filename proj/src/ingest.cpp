#include "anomaly/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <string_view>

#include <json.hpp>

namespace anomaly {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

// Splits on '\n', stripping a trailing '\r' from each line.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines = split(text, '\n');
  for (auto& line : lines) {
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
  }
  return lines;
}

bool parse_int_field(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_double_field(std::string_view s, double& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_fixed_uint(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  out = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    out = out * 10 + (s[i] - '0');
  }
  return true;
}

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const int yoe = static_cast<int>(y - era * 400);
  const int doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const int doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

bool parse_datetime(std::string_view s, std::int64_t& out) {
  // "YYYY-MM-DD hh:mm:ss" with an optional ".fraction" suffix.
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || s[10] != ' ' || s[13] != ':' ||
      s[16] != ':') {
    return false;
  }
  if (s.size() > 19 && (s[19] != '.' || s.size() == 20)) return false;
  int year, month, day, hour, minute, second;
  if (!parse_fixed_uint(s, 0, 4, year) || !parse_fixed_uint(s, 5, 2, month) ||
      !parse_fixed_uint(s, 8, 2, day) || !parse_fixed_uint(s, 11, 2, hour) ||
      !parse_fixed_uint(s, 14, 2, minute) || !parse_fixed_uint(s, 17, 2, second)) {
    return false;
  }
  for (std::size_t i = 20; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  static const int days_in_month[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month < 1 || month > 12) return false;
  int max_day = days_in_month[month - 1];
  bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  if (month == 2 && leap) max_day = 29;
  if (day < 1 || day > max_day) return false;
  if (hour > 23 || minute > 59 || second > 60) return false;
  out = days_from_civil(year, month, day) * 86400 + hour * 3600 + minute * 60 + second;
  return true;
}

std::int64_t parse_timestamp_impl(std::string_view token, int line) {
  std::int64_t ts;
  if (parse_int_field(token, ts)) return ts;
  if (parse_datetime(token, ts)) return ts;
  throw ParseError("unparseable timestamp '" + std::string(token) + "'", line);
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::int64_t parse_timestamp(const std::string& token) {
  return parse_timestamp_impl(token, 0);
}

TimeSeries parse_metric_csv(const std::string& text) {
  std::vector<std::string_view> lines = split_lines(text);
  if (lines.empty() || lines[0].empty()) {
    throw ParseError("missing header", 1);
  }
  std::vector<std::string_view> header = split(lines[0], ',');
  if (header[0] != "timestamp") {
    throw ParseError("first column must be 'timestamp', got '" + std::string(header[0]) + "'",
                     1);
  }
  if (header.size() < 2) {
    throw ParseError("no value columns", 1);
  }
  const std::size_t dims = header.size() - 1;

  struct Row {
    std::int64_t ts;
    std::vector<double> values;
    int line;
  };
  std::vector<Row> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    int line_no = static_cast<int>(i + 1);
    std::vector<std::string_view> fields = split(lines[i], ',');
    if (fields.size() != dims + 1) {
      throw ParseError("expected " + std::to_string(dims + 1) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    Row row;
    row.ts = parse_timestamp_impl(fields[0], line_no);
    row.line = line_no;
    row.values.resize(dims);
    for (std::size_t d = 0; d < dims; ++d) {
      if (!parse_double_field(fields[d + 1], row.values[d])) {
        throw ParseError("malformed value '" + std::string(fields[d + 1]) + "' in column '" +
                             std::string(header[d + 1]) + "'",
                         line_no);
      }
    }
    rows.push_back(std::move(row));
  }

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.ts < b.ts; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].ts == rows[i - 1].ts) {
      throw ParseError("duplicate timestamp " + std::to_string(rows[i].ts), rows[i].line);
    }
  }

  TimeSeries series;
  series.dim_names.assign(header.begin() + 1, header.end());
  series.timestamps.resize(rows.size());
  series.values.resize(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(dims));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    series.timestamps[i] = rows[i].ts;
    for (std::size_t d = 0; d < dims; ++d) {
      series.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) =
          rows[i].values[d];
    }
  }
  return series;
}

LabelSet parse_labels(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed label document: ") + e.what(), 0);
  }
  if (!doc.is_object()) {
    throw ParseError("label document must be an object of file -> timestamps", 0);
  }
  LabelSet labels;
  for (const auto& [file, entries] : doc.items()) {
    if (!entries.is_array()) {
      throw ParseError("labels for '" + file + "' must be an array", 0);
    }
    std::vector<std::int64_t>& out = labels[file];
    for (const auto& entry : entries) {
      if (entry.is_number_integer()) {
        out.push_back(entry.get<std::int64_t>());
      } else if (entry.is_string()) {
        out.push_back(parse_timestamp_impl(entry.get<std::string>(), 0));
      } else {
        throw ParseError("labels for '" + file + "' must be timestamps", 0);
      }
    }
    std::sort(out.begin(), out.end());
  }
  return labels;
}

std::string write_detections(const std::vector<DetectionRecord>& records,
                             const std::vector<std::string>& dim_names) {
  std::string out = "timestamp";
  for (const auto& name : dim_names) {
    out += ',';
    out += name;
  }
  out += ",error,likelihood,flagged\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const DetectionRecord& rec = records[i];
    if (rec.raw_values.size() != dim_names.size()) {
      throw std::invalid_argument("detection record " + std::to_string(i) + " has " +
                                  std::to_string(rec.raw_values.size()) + " values for " +
                                  std::to_string(dim_names.size()) + " dimensions");
    }
    out += std::to_string(rec.timestamp);
    for (double v : rec.raw_values) {
      out += ',';
      out += format_real(v);
    }
    out += ',';
    out += format_real(rec.error);
    out += ',';
    out += format_real(rec.likelihood);
    out += rec.flagged ? ",1\n" : ",0\n";
  }
  return out;
}

DetectionTable read_detections(const std::string& text) {
  std::vector<std::string_view> lines = split_lines(text);
  if (lines.empty() || lines[0].empty()) {
    throw ParseError("missing header", 1);
  }
  std::vector<std::string_view> header = split(lines[0], ',');
  if (header.size() < 4 || header[0] != "timestamp" ||
      header[header.size() - 3] != "error" || header[header.size() - 2] != "likelihood" ||
      header.back() != "flagged") {
    throw ParseError("expected header timestamp,<dims...>,error,likelihood,flagged", 1);
  }
  DetectionTable table;
  table.dim_names.assign(header.begin() + 1, header.end() - 3);
  const std::size_t dims = table.dim_names.size();

  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    int line_no = static_cast<int>(i + 1);
    std::vector<std::string_view> fields = split(lines[i], ',');
    if (fields.size() != dims + 4) {
      throw ParseError("expected " + std::to_string(dims + 4) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    DetectionRecord rec;
    rec.timestamp = parse_timestamp_impl(fields[0], line_no);
    rec.raw_values.resize(dims);
    for (std::size_t d = 0; d < dims; ++d) {
      if (!parse_double_field(fields[d + 1], rec.raw_values[d])) {
        throw ParseError("malformed value '" + std::string(fields[d + 1]) + "'", line_no);
      }
    }
    if (!parse_double_field(fields[dims + 1], rec.error) ||
        !parse_double_field(fields[dims + 2], rec.likelihood)) {
      throw ParseError("malformed error/likelihood field", line_no);
    }
    if (fields[dims + 3] == "1") {
      rec.flagged = true;
    } else if (fields[dims + 3] == "0") {
      rec.flagged = false;
    } else {
      throw ParseError("flagged field must be 0 or 1", line_no);
    }
    table.records.push_back(std::move(rec));
  }
  return table;
}

}  // namespace anomaly
