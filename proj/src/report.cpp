#include "lflow/report.hpp"

#include <cmath>
#include <cstdio>
#include <json.hpp>

namespace lflow {

namespace {

std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string scientific(double v) {
  if (!std::isfinite(v)) return fixed(v, 0);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9e", v);
  return buf;
}

std::vector<std::string> cells(const RunReport& r) {
  return {r.run_id,
          r.task,
          r.cov_mode,
          r.solver,
          std::to_string(r.nfe),
          fixed(r.psnr_db, 6),
          fixed(r.ssim, 6),
          scientific(r.mse),
          fixed(r.wall_ms, 3),
          std::to_string(r.seed),
          r.config_hash,
          std::to_string(r.clamp_events),
          r.status};
}

}  // namespace

const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols = {"run_id", "task",    "cov_mode", "solver",      "nfe",
                                                "psnr_db", "ssim",    "mse",      "wall_ms",     "seed",
                                                "config_hash", "clamp_events", "status"};
  return cols;
}

std::string reports_to_csv(const std::vector<RunReport>& reports) {
  std::string out;
  const auto& cols = report_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += '\n';
  for (const auto& r : reports) {
    const auto row = cells(r);
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
    out += '\n';
  }
  return out;
}

std::string reports_to_json(const std::vector<RunReport>& reports) {
  auto metric = [](double v) -> nlohmann::ordered_json {
    if (std::isfinite(v)) return v;
    return fixed(v, 0);
  };
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["run_id"] = r.run_id;
    j["task"] = r.task;
    j["cov_mode"] = r.cov_mode;
    j["solver"] = r.solver;
    j["nfe"] = r.nfe;
    j["psnr_db"] = metric(r.psnr_db);
    j["ssim"] = metric(r.ssim);
    j["mse"] = metric(r.mse);
    j["wall_ms"] = r.wall_ms;
    j["seed"] = r.seed;
    j["config_hash"] = r.config_hash;
    j["clamp_events"] = r.clamp_events;
    j["status"] = r.status;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

}  // namespace lflow
