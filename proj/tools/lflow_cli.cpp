#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "lflow/image_io.hpp"
#include "lflow/oracle_suite.hpp"
#include "lflow/report.hpp"
#include "lflow/task.hpp"

namespace fs = std::filesystem;
using namespace lflow;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> cov_modes;
  std::vector<std::string> solvers;
  std::string out;
  std::string report = "csv";
  std::string trajectory;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "task config file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "random seed");
  app->add_option("--cov-mode", c.cov_modes, "lflow|eq17|pigdm|zero")
      ->check(CLI::IsMember({"lflow", "eq17", "pigdm", "zero"}));
  app->add_option("--solver", c.solvers, "euler|heun|adaptive")->check(CLI::IsMember({"euler", "heun", "adaptive"}));
  app->add_option("--out", c.out, "output directory");
  app->add_option("--report", c.report, "report format")->check(CLI::IsMember({"csv", "json"}));
  app->add_option("--trajectory", c.trajectory, "trajectory CSV path");
}

TaskConfig resolve(const Common& c) {
  TaskConfig cfg = c.config_path.empty() ? TaskConfig::defaults(TaskKind::GaussianDeblur) : load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.cov_modes.empty()) {
    const double sd = cfg.sampler.guidance.cov_mode.sigma_data;
    cfg.sampler.guidance.cov_mode = parse_covariance_mode(c.cov_modes.front());
    cfg.sampler.guidance.cov_mode.sigma_data = sd;
  }
  if (!c.solvers.empty()) cfg.sampler.solver.kind = parse_solver_kind(c.solvers.front());
  if (!c.out.empty()) cfg.out_dir = c.out;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
  f << text;
}

void emit_reports(const Common& c, const TaskConfig& cfg, const std::vector<RunReport>& reports) {
  const std::string text = c.report == "json" ? reports_to_json(reports) : reports_to_csv(reports);
  std::cout << text;
  write_text(fs::path(cfg.out_dir) / ("report." + c.report), text);
}

int exit_status(const std::vector<RunReport>& reports) {
  int failed = 0;
  for (const auto& r : reports)
    if (r.status.rfind("ok", 0) != 0) {
      std::cerr << "run " << r.run_id << ": " << r.status << "\n";
      ++failed;
    }
  return failed == 0 ? 0 : 1;
}

RealField viewable_measurement(const LinearOperator& op, const RealField& y) {
  return op.kind() == LinearOperator::Kind::Mask ? op.adjoint(y) : y;
}

int cmd_degrade(const Common& c) {
  const TaskConfig cfg = resolve(c);
  const RealField x = load_task_image(cfg);
  const LinearOperator op = build_operator(cfg, x.shape());
  const RealField y = degrade(cfg, op, x);
  fs::create_directories(cfg.out_dir);
  write_image(fs::path(cfg.out_dir) / "x_true.pgm", x);
  write_image(fs::path(cfg.out_dir) / "y.pgm", viewable_measurement(op, y));
  write_text(fs::path(cfg.out_dir) / "y.txt", format_grid(y));
  std::cout << "wrote " << (fs::path(cfg.out_dir) / "y.pgm").string() << "\n";
  return 0;
}

int cmd_sample(const Common& c) {
  TaskConfig cfg = resolve(c);
  cfg.sampler.record_states = false;
  const RealField x = load_task_image(cfg);
  const LinearOperator op = build_operator(cfg, x.shape());
  const RealField y = degrade(cfg, op, x);
  const Reconstruction rec = reconstruct(cfg, y, x.shape(), &x);
  fs::create_directories(cfg.out_dir);
  write_image(fs::path(cfg.out_dir) / "y.pgm", viewable_measurement(op, y));
  if (rec.x_hat.size() > 0) write_image(fs::path(cfg.out_dir) / "x_hat.pgm", rec.x_hat);
  if (!c.trajectory.empty()) {
    std::ostringstream os;
    write_trajectory_csv(os, rec.trajectory);
    write_text(c.trajectory, os.str());
  }
  emit_reports(c, cfg, {rec.report});
  return exit_status({rec.report});
}

int cmd_bench(const Common& c) {
  const TaskConfig base = resolve(c);
  std::vector<CovarianceMode> modes;
  const std::vector<std::string> mode_names =
      c.cov_modes.empty() ? std::vector<std::string>{"lflow", "eq17", "pigdm", "zero"} : c.cov_modes;
  for (const auto& m : mode_names) {
    CovarianceMode mode = parse_covariance_mode(m);
    mode.sigma_data = base.sampler.guidance.cov_mode.sigma_data;
    modes.push_back(mode);
  }
  const std::vector<std::string> solver_names =
      c.solvers.empty() ? std::vector<std::string>{to_string(base.sampler.solver.kind)} : c.solvers;
  std::vector<RunReport> reports;
  for (const auto& s : solver_names) {
    TaskConfig cfg = base;
    cfg.sampler.solver.kind = parse_solver_kind(s);
    for (auto& r : bench_cov_modes(cfg, modes)) reports.push_back(std::move(r));
  }
  emit_reports(c, base, reports);
  return exit_status(reports);
}

int print_checks(const std::vector<CheckResult>& checks) {
  bool ok = true;
  for (const auto& r : checks) {
    std::printf("%s %-36s measured=%.3e threshold=%.3e%s%s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.measured,
                r.threshold, r.detail.empty() ? "" : "  ", r.detail.c_str());
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Posterior-guided flow sampling for linear inverse problems"};
  app.require_subcommand(1);

  Common sample_opts, degrade_opts, bench_opts;
  auto* sample = app.add_subcommand("sample", "degrade the task image and reconstruct it");
  add_common(sample, sample_opts);
  auto* degrade_cmd = app.add_subcommand("degrade", "simulate the measurement only");
  add_common(degrade_cmd, degrade_opts);
  auto* bench = app.add_subcommand("bench", "sweep covariance modes and solvers on one measurement");
  add_common(bench, bench_opts);
  auto* oracle_check = app.add_subcommand("oracle-check", "run the oracle invariant suite");
  std::vector<std::size_t> sizes{8, 16, 64}, factors{2, 4};
  auto* lemma = app.add_subcommand("lemma-b1", "check block downsampling against spatial subsampling");
  lemma->add_option("--sizes", sizes, "signal lengths");
  lemma->add_option("--factors", factors, "downsampling factors");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sample) return cmd_sample(sample_opts);
    if (*degrade_cmd) return cmd_degrade(degrade_opts);
    if (*bench) return cmd_bench(bench_opts);
    if (*oracle_check) return print_checks(run_oracle_suite());
    if (*lemma) return print_checks(run_block_downsampling(sizes, factors));
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
