#pragma once

#include <string>

#include "anomaly/ingest.hpp"

namespace anomaly {

// Renders detections as a standalone SVG document: one panel per metric
// dimension, plus a panel overlaying reconstruction error and anomaly
// likelihood with flagged points marked. `threshold` draws the likelihood
// flag level. Throws std::invalid_argument when there are no records.
std::string render_detection_svg(const DetectionTable& detections, double threshold);

}  // namespace anomaly
