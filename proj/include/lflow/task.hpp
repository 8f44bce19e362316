#pragma once

// Task configuration and the image-level restoration pipeline.
//
// Config files are INI-like: "[section]" headers followed by "key = value"
// lines; '#' starts a comment. Every key has a default (see dump_config for
// the full canonical listing) and unknown sections or keys are errors.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lflow/decoder.hpp"
#include "lflow/field.hpp"
#include "lflow/flow_field.hpp"
#include "lflow/operators.hpp"
#include "lflow/sampler.hpp"

namespace lflow {

enum class TaskKind { GaussianDeblur, MotionDeblur, SuperResolution, BoxInpaint };

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);

struct TaskConfig {
  TaskKind task = TaskKind::GaussianDeblur;
  std::uint64_t seed = 0;

  // [image]: empty path selects the built-in synthetic image.
  std::string image_path;
  std::size_t synthetic_size = 64;

  // [operator]
  std::size_t kernel_size = 9;
  double kernel_std = 1.5;
  double motion_angle = 0.7853981633974483;
  std::size_t motion_length = 7;
  std::size_t sr_factor = 2;
  std::size_t box_height = 32;
  std::size_t box_width = 32;
  /// Box origin; std::nullopt centres the box.
  std::optional<std::size_t> box_top;
  std::optional<std::size_t> box_left;
  double sigma_y = 0.01;

  // [prior]
  double sigma_latr = 0.08;
  std::string decoder_path;  // empty: identity decoder

  SamplerConfig sampler{};

  // [output]
  std::string out_dir = ".";

  /// Defaults for a task: K = 2, t_s = 0.8, adaptive Heun with atol = rtol =
  /// 1e-3 (inpainting, motion deblur) or 1e-5 (Gaussian deblur, SR).
  static TaskConfig defaults(TaskKind task);
};

TaskConfig parse_config(const std::string& text);
TaskConfig load_config(const std::filesystem::path& path);
/// Canonical dump; parse_config(dump_config(c)) reproduces c.
std::string dump_config(const TaskConfig& config);
/// FNV-1a 64 over dump_config, as 16 hex digits.
std::string config_hash(const TaskConfig& config);

/// Deterministic 64 x 64-style piecewise-smooth test image in [0, 1].
RealField synthetic_image(std::size_t size);
RealField load_task_image(const TaskConfig& config);

LinearOperator build_operator(const TaskConfig& config, Shape image_shape);
DecoderSpec build_decoder(const TaskConfig& config);
VectorFieldSpec build_field(const TaskConfig& config);

/// Seed of the sampler's noise stream; the measurement noise uses config.seed itself.
std::uint64_t sampler_seed(std::uint64_t seed);

/// y = A x + sigma_y n with n drawn from SeededRng(config.seed).
RealField degrade(const TaskConfig& config, const RealField& x_true);
RealField degrade(const TaskConfig& config, const LinearOperator& op, const RealField& x_true);

struct RunReport {
  std::string run_id;
  std::string task;
  std::string cov_mode;
  std::string solver;
  std::size_t nfe = 0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double mse = 0.0;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::size_t clamp_events = 0;
  std::string status = "ok";
};

struct Reconstruction {
  RealField x_hat;
  RunReport report;
  Trajectory trajectory;
};

/// Full pipeline: init -> integrate -> final Tweedie step -> decode
/// (-> splice for inpainting). Metrics are filled when `x_true` is given.
/// Solver failures are caught and recorded in report.status.
Reconstruction reconstruct(const TaskConfig& config, const RealField& y, Shape image_shape,
                           const RealField* x_true = nullptr);

/// One report per mode, sharing seed and measurement.
std::vector<RunReport> bench_cov_modes(const TaskConfig& config, const std::vector<CovarianceMode>& modes);

}  // namespace lflow
