#pragma once

#include <string>
#include <vector>

namespace aelpn {

// One plot-ready data point. parameter is the swept quantity (sigma, the
// scale alpha of g, an x-grid point, ...), metric names what `value` is.
struct ReportRow {
  std::string experiment;
  std::string model_tag;
  std::string parameter;
  double param_value = 0.0;
  std::string metric;
  double value = 0.0;
};

// Fixed column order, 17-significant-digit reals, LF line endings.
void write_csv(const std::string& path, const std::vector<ReportRow>& rows);

// The same rows as a JSON array of objects.
void write_json(const std::string& path, const std::vector<ReportRow>& rows);

}  // namespace aelpn
