#include "anomaly/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace anomaly {

ScoreProfile standard_profile() { return {"standard", 1.0, 0.11, 1.0}; }
ScoreProfile reward_low_fp_profile() { return {"reward_low_fp", 1.0, 0.22, 1.0}; }
ScoreProfile reward_low_fn_profile() { return {"reward_low_fn", 1.0, 0.11, 2.0}; }

std::vector<ScoreProfile> all_profiles() {
  return {standard_profile(), reward_low_fp_profile(), reward_low_fn_profile()};
}

AnomalyWindowSet build_windows(const std::vector<std::int64_t>& labels,
                               const TimeSeries& series, double window_fraction,
                               double probation_fraction) {
  validate(series);
  if (series.empty()) {
    throw std::invalid_argument("build_windows: empty series");
  }
  if (window_fraction < 0.0 || probation_fraction < 0.0 || probation_fraction > 1.0) {
    throw std::invalid_argument("build_windows: invalid fractions");
  }
  const auto& ts = series.timestamps;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(ts.size());

  AnomalyWindowSet out;
  const std::ptrdiff_t probation_count =
      static_cast<std::ptrdiff_t>(std::floor(probation_fraction * static_cast<double>(n)));
  out.probation_end = probation_count > 0 ? ts[static_cast<std::size_t>(probation_count - 1)]
                                          : ts.front() - 1;
  if (labels.empty()) {
    return out;
  }

  // Snap tolerance: one typical sample interval.
  std::int64_t interval =
      n > 1 ? std::max<std::int64_t>(1, (ts.back() - ts.front()) / (n - 1)) : 1;

  const std::ptrdiff_t len = std::max<std::ptrdiff_t>(
      1, static_cast<std::ptrdiff_t>(std::llround(
             window_fraction * static_cast<double>(n) / static_cast<double>(labels.size()))));

  struct IdxWindow {
    std::ptrdiff_t begin, end;
  };
  std::vector<IdxWindow> windows;
  for (std::int64_t label : labels) {
    auto it = std::lower_bound(ts.begin(), ts.end(), label);
    std::ptrdiff_t idx;
    if (it == ts.end()) {
      idx = n - 1;
    } else if (it == ts.begin()) {
      idx = 0;
    } else {
      // Nearest of the two candidates around the insertion point.
      std::ptrdiff_t hi = it - ts.begin();
      idx = (ts[static_cast<std::size_t>(hi)] - label <
             label - ts[static_cast<std::size_t>(hi - 1)])
                ? hi
                : hi - 1;
    }
    if (std::abs(ts[static_cast<std::size_t>(idx)] - label) > interval) {
      throw std::invalid_argument("build_windows: label timestamp " + std::to_string(label) +
                                  " does not align with the series");
    }
    std::ptrdiff_t begin = idx - len / 2;
    std::ptrdiff_t end = begin + len - 1;
    windows.push_back({std::clamp<std::ptrdiff_t>(begin, 0, n - 1),
                       std::clamp<std::ptrdiff_t>(end, 0, n - 1)});
  }

  std::sort(windows.begin(), windows.end(),
            [](const IdxWindow& a, const IdxWindow& b) { return a.begin < b.begin; });
  std::vector<IdxWindow> merged;
  for (const IdxWindow& w : windows) {
    if (!merged.empty() && w.begin <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, w.end);
    } else {
      merged.push_back(w);
    }
  }
  for (const IdxWindow& w : merged) {
    out.windows.push_back({ts[static_cast<std::size_t>(w.begin)],
                           ts[static_cast<std::size_t>(w.end)]});
  }
  return out;
}

double scaled_sigmoid(double y) { return 2.0 / (1.0 + std::exp(5.0 * y)) - 1.0; }

namespace {

struct IdxWindow {
  std::ptrdiff_t begin, end;
  bool detected = false;
};

// Maps ground-truth windows into positions of `timestamps`. Windows that
// cover no timestamp come out with begin > end and can only be missed.
std::vector<IdxWindow> map_windows(const std::vector<std::int64_t>& timestamps,
                                   const AnomalyWindowSet& windows) {
  std::vector<IdxWindow> out;
  out.reserve(windows.windows.size());
  for (const AnomalyWindow& w : windows.windows) {
    if (w.begin > w.end) {
      throw std::invalid_argument("score_file: window with begin after end");
    }
    auto lo = std::lower_bound(timestamps.begin(), timestamps.end(), w.begin);
    auto hi = std::upper_bound(timestamps.begin(), timestamps.end(), w.end);
    out.push_back({lo - timestamps.begin(), hi - timestamps.begin() - 1});
  }
  return out;
}

double window_position(std::ptrdiff_t i, const IdxWindow& w) {
  return static_cast<double>(i - w.end) /
         static_cast<double>(std::max<std::ptrdiff_t>(1, w.end - w.begin));
}

}  // namespace

FileScore score_file(const std::vector<std::int64_t>& timestamps,
                     const std::vector<bool>& flags, const AnomalyWindowSet& windows,
                     const ScoreProfile& profile) {
  if (timestamps.size() != flags.size()) {
    throw std::invalid_argument("score_file: " + std::to_string(flags.size()) + " flags for " +
                                std::to_string(timestamps.size()) + " timestamps");
  }
  std::vector<IdxWindow> idx = map_windows(timestamps, windows);

  FileScore score;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (!flags[i] || timestamps[i] <= windows.probation_end) continue;
    const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(i);

    // Last window starting at or before pos is the only candidate container;
    // it is also the nearest preceding window when pos lies outside.
    IdxWindow* candidate = nullptr;
    for (auto& w : idx) {
      if (w.begin <= pos) {
        candidate = &w;
      } else {
        break;
      }
    }
    if (candidate && pos <= candidate->end) {
      if (!candidate->detected) {
        candidate->detected = true;
        ++score.detected_windows;
        score.raw += profile.tp_weight * scaled_sigmoid(window_position(pos, *candidate));
      }
    } else {
      ++score.false_positives;
      if (candidate) {
        score.raw += profile.fp_weight * scaled_sigmoid(window_position(pos, *candidate));
      } else {
        score.raw -= profile.fp_weight;
      }
    }
  }
  for (const IdxWindow& w : idx) {
    if (!w.detected) {
      ++score.missed_windows;
      score.raw -= profile.fn_weight;
    }
  }
  return score;
}

std::vector<bool> perfect_flags(const std::vector<std::int64_t>& timestamps,
                                const AnomalyWindowSet& windows) {
  std::vector<bool> flags(timestamps.size(), false);
  std::vector<IdxWindow> idx = map_windows(timestamps, windows);
  for (const IdxWindow& w : idx) {
    if (w.begin <= w.end) {
      flags[static_cast<std::size_t>(w.begin)] = true;
    }
  }
  return flags;
}

double normalize_corpus(double raw, double perfect_raw, double null_raw) {
  if (!(perfect_raw > null_raw)) {
    throw std::invalid_argument("normalize_corpus: perfect score does not exceed null score");
  }
  return 100.0 * (raw - null_raw) / (perfect_raw - null_raw);
}

ScoreReport make_report(const ScoreProfile& profile,
                        std::vector<ScoreReport::FileEntry> files) {
  if (files.empty()) {
    throw std::invalid_argument("make_report: no scored files");
  }
  ScoreReport report;
  report.profile = profile.name;
  report.files = std::move(files);
  for (const auto& f : report.files) {
    report.corpus_raw += f.raw;
    report.corpus_perfect += f.perfect_raw;
    report.corpus_null += f.null_raw;
  }
  report.normalized =
      normalize_corpus(report.corpus_raw, report.corpus_perfect, report.corpus_null);
  return report;
}

std::string write_report_csv(const std::vector<ScoreReport>& reports,
                             const std::vector<std::string>& notes) {
  std::string out;
  for (const auto& note : notes) {
    out += "# " + note + "\n";
  }
  out += "profile,file,raw,perfect_raw,null_raw,detected,false_positives,missed,normalized\n";
  char buf[256];
  for (const ScoreReport& report : reports) {
    for (const auto& f : report.files) {
      std::snprintf(buf, sizeof(buf), "%s,%s,%.10g,%.10g,%.10g,%d,%d,%d,\n",
                    report.profile.c_str(), f.file.c_str(), f.raw, f.perfect_raw, f.null_raw,
                    f.detected_windows, f.false_positives, f.missed_windows);
      out += buf;
    }
    int detected = 0, fps = 0, missed = 0;
    for (const auto& f : report.files) {
      detected += f.detected_windows;
      fps += f.false_positives;
      missed += f.missed_windows;
    }
    std::snprintf(buf, sizeof(buf), "%s,ALL,%.10g,%.10g,%.10g,%d,%d,%d,%.10g\n",
                  report.profile.c_str(), report.corpus_raw, report.corpus_perfect,
                  report.corpus_null, detected, fps, missed, report.normalized);
    out += buf;
  }
  return out;
}

}  // namespace anomaly
