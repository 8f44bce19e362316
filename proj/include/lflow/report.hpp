#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "lflow/task.hpp"

namespace lflow {

/// Column order of the CSV report (and key order of the JSON mirror).
const std::vector<std::string>& report_columns();

/// Header line plus one row per report. PSNR of identical images prints as
/// "inf"; metrics of failed runs print as "nan".
std::string reports_to_csv(const std::vector<RunReport>& reports);
/// JSON array of objects with the CSV column names as keys. Non-finite
/// metrics are written as strings ("inf", "nan").
std::string reports_to_json(const std::vector<RunReport>& reports);

}  // namespace lflow
