#include "aelpn/reports.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "aelpn/errors.hpp"

namespace aelpn {

namespace {

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_csv(const std::string& path, const std::vector<ReportRow>& rows) {
  std::ofstream out(path, std::ios::binary);  // binary: LF on every platform
  if (!out) throw IoError(path + ": cannot open for writing");
  out << "experiment,model,parameter,param_value,metric,value\n";
  for (const ReportRow& r : rows) {
    out << r.experiment << ',' << r.model_tag << ',' << r.parameter << ','
        << fmt_real(r.param_value) << ',' << r.metric << ','
        << fmt_real(r.value) << '\n';
  }
  if (!out) throw IoError(path + ": write failed");
}

void write_json(const std::string& path, const std::vector<ReportRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const ReportRow& r : rows) {
    arr.push_back({{"experiment", r.experiment},
                   {"model", r.model_tag},
                   {"parameter", r.parameter},
                   {"param_value", r.param_value},
                   {"metric", r.metric},
                   {"value", r.value}});
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << arr.dump(2) << "\n";
  if (!out) throw IoError(path + ": write failed");
}

}  // namespace aelpn
