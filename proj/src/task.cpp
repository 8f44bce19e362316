#include "lflow/task.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <numbers>
#include <thread>

#include "lflow/image_io.hpp"
#include "lflow/metrics.hpp"
#include "lflow/oracle.hpp"

namespace lflow {

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::GaussianDeblur: return "gaussian_deblur";
    case TaskKind::MotionDeblur: return "motion_deblur";
    case TaskKind::SuperResolution: return "super_resolution";
    case TaskKind::BoxInpaint: return "box_inpaint";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view name) {
  for (TaskKind k : {TaskKind::GaussianDeblur, TaskKind::MotionDeblur, TaskKind::SuperResolution, TaskKind::BoxInpaint})
    if (name == to_string(k)) return k;
  throw Error(ErrorCode::Config, "unknown task '" + std::string(name) + "'");
}

TaskConfig TaskConfig::defaults(TaskKind task) {
  TaskConfig c;
  c.task = task;
  c.sampler.t_s = 0.8;
  c.sampler.guidance.K = 2;
  c.sampler.solver.kind = SolverConfig::Kind::AdaptiveHeun;
  const bool loose = task == TaskKind::BoxInpaint || task == TaskKind::MotionDeblur;
  c.sampler.solver.atol = loose ? 1e-3 : 1e-5;
  c.sampler.solver.rtol = loose ? 1e-3 : 1e-5;
  c.sigma_y = 0.01;
  c.sampler.guidance.sigma_y = c.sigma_y;
  return c;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
    throw Error(ErrorCode::Config, key + ": expected a number, got '" + v + "'");
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw Error(ErrorCode::Config, key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

template <typename E>
E parse_enum(const std::string& key, const std::string& v, std::initializer_list<std::pair<const char*, E>> options) {
  for (const auto& [name, value] : options)
    if (v == name) return value;
  throw Error(ErrorCode::Config, key + ": unsupported value '" + v + "'");
}

template <typename E>
std::string enum_name(E value, std::initializer_list<std::pair<const char*, E>> options) {
  for (const auto& [name, v] : options)
    if (v == value) return name;
  return "?";
}

using InnerLoop = GuidanceSpec::InnerLoop;
using Propagation = GuidanceSpec::Propagation;
using GSolver = GuidanceSpec::Solver;
using InitMode = SamplerConfig::InitMode;

const std::initializer_list<std::pair<const char*, InnerLoop>> kInnerLoops = {{"refresh", InnerLoop::Refresh},
                                                                             {"literal", InnerLoop::Literal}};
const std::initializer_list<std::pair<const char*, Propagation>> kPropagations = {
    {"isotropic", Propagation::Isotropic}, {"decoder", Propagation::DecoderJacobian}};
const std::initializer_list<std::pair<const char*, GSolver>> kGuidanceSolvers = {{"closed_form", GSolver::ClosedForm},
                                                                                {"cg", GSolver::ConjugateGradient}};
const std::initializer_list<std::pair<const char*, InitMode>> kInitModes = {{"encoded", InitMode::EncodedMeasurement},
                                                                           {"noise", InitMode::PureNoise}};

struct Entry {
  const char* section;
  const char* key;
  std::function<std::string(const TaskConfig&)> get;
  std::function<void(TaskConfig&, const std::string&)> set;
};

// Canonical key order; dump_config walks this table.
const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    auto num = [&t](const char* sec, const char* key, auto member) {
      t.push_back({sec, key, [member](const TaskConfig& c) { return format_double(member(const_cast<TaskConfig&>(c))); },
                   [member, key](TaskConfig& c, const std::string& v) { member(c) = parse_double(key, v); }});
    };
    auto count = [&t](const char* sec, const char* key, auto member) {
      t.push_back({sec, key,
                   [member](const TaskConfig& c) { return std::to_string(member(const_cast<TaskConfig&>(c))); },
                   [member, key](TaskConfig& c, const std::string& v) {
                     member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(parse_uint(key, v));
                   }});
    };

    t.push_back({"task", "kind", [](const TaskConfig& c) { return to_string(c.task); },
                 [](TaskConfig& c, const std::string& v) { c.task = parse_task_kind(v); }});
    count("task", "seed", [](TaskConfig& c) -> std::uint64_t& { return c.seed; });

    t.push_back({"image", "path", [](const TaskConfig& c) { return c.image_path; },
                 [](TaskConfig& c, const std::string& v) { c.image_path = v; }});
    count("image", "synthetic_size", [](TaskConfig& c) -> std::size_t& { return c.synthetic_size; });

    count("operator", "kernel_size", [](TaskConfig& c) -> std::size_t& { return c.kernel_size; });
    num("operator", "kernel_std", [](TaskConfig& c) -> double& { return c.kernel_std; });
    num("operator", "motion_angle", [](TaskConfig& c) -> double& { return c.motion_angle; });
    count("operator", "motion_length", [](TaskConfig& c) -> std::size_t& { return c.motion_length; });
    count("operator", "sr_factor", [](TaskConfig& c) -> std::size_t& { return c.sr_factor; });
    auto optional_pos = [&t](const char* key, std::optional<std::size_t> TaskConfig::*member) {
      t.push_back({"operator", key,
                   [member](const TaskConfig& c) {
                     return (c.*member) ? std::to_string(*(c.*member)) : std::string("center");
                   },
                   [member, key](TaskConfig& c, const std::string& v) {
                     if (v == "center")
                       c.*member = std::nullopt;
                     else
                       c.*member = static_cast<std::size_t>(parse_uint(key, v));
                   }});
    };
    optional_pos("box_top", &TaskConfig::box_top);
    optional_pos("box_left", &TaskConfig::box_left);
    count("operator", "box_height", [](TaskConfig& c) -> std::size_t& { return c.box_height; });
    count("operator", "box_width", [](TaskConfig& c) -> std::size_t& { return c.box_width; });
    num("operator", "sigma_y", [](TaskConfig& c) -> double& { return c.sigma_y; });

    num("prior", "sigma_latr", [](TaskConfig& c) -> double& { return c.sigma_latr; });
    t.push_back({"prior", "decoder_path", [](const TaskConfig& c) { return c.decoder_path; },
                 [](TaskConfig& c, const std::string& v) { c.decoder_path = v; }});

    num("sampler", "t_s", [](TaskConfig& c) -> double& { return c.sampler.t_s; });
    t.push_back({"sampler", "solver", [](const TaskConfig& c) { return to_string(c.sampler.solver.kind); },
                 [](TaskConfig& c, const std::string& v) {
                   try {
                     c.sampler.solver.kind = parse_solver_kind(v);
                   } catch (const Error& e) {
                     throw Error(ErrorCode::Config, e.what());
                   }
                 }});
    count("sampler", "steps", [](TaskConfig& c) -> std::size_t& { return c.sampler.solver.steps; });
    num("sampler", "atol", [](TaskConfig& c) -> double& { return c.sampler.solver.atol; });
    num("sampler", "rtol", [](TaskConfig& c) -> double& { return c.sampler.solver.rtol; });
    num("sampler", "h_init", [](TaskConfig& c) -> double& { return c.sampler.solver.h_init; });
    num("sampler", "h_min", [](TaskConfig& c) -> double& { return c.sampler.solver.h_min; });
    count("sampler", "max_steps", [](TaskConfig& c) -> std::size_t& { return c.sampler.solver.max_steps; });
    t.push_back({"sampler", "init", [](const TaskConfig& c) { return enum_name(c.sampler.init_mode, kInitModes); },
                 [](TaskConfig& c, const std::string& v) { c.sampler.init_mode = parse_enum("init", v, kInitModes); }});

    t.push_back({"guidance", "cov_mode", [](const TaskConfig& c) { return to_string(c.sampler.guidance.cov_mode); },
                 [](TaskConfig& c, const std::string& v) {
                   const double sd = c.sampler.guidance.cov_mode.sigma_data;
                   try {
                     c.sampler.guidance.cov_mode = parse_covariance_mode(v);
                   } catch (const Error& e) {
                     throw Error(ErrorCode::Config, e.what());
                   }
                   c.sampler.guidance.cov_mode.sigma_data = sd;
                 }});
    num("guidance", "sigma_data", [](TaskConfig& c) -> double& { return c.sampler.guidance.cov_mode.sigma_data; });
    count("guidance", "K", [](TaskConfig& c) -> std::size_t& { return c.sampler.guidance.K; });
    t.push_back({"guidance", "inner_loop",
                 [](const TaskConfig& c) { return enum_name(c.sampler.guidance.inner_loop, kInnerLoops); },
                 [](TaskConfig& c, const std::string& v) {
                   c.sampler.guidance.inner_loop = parse_enum("inner_loop", v, kInnerLoops);
                 }});
    t.push_back({"guidance", "solver",
                 [](const TaskConfig& c) { return enum_name(c.sampler.guidance.solver, kGuidanceSolvers); },
                 [](TaskConfig& c, const std::string& v) {
                   c.sampler.guidance.solver = parse_enum("solver", v, kGuidanceSolvers);
                 }});
    count("guidance", "cg_max_iter", [](TaskConfig& c) -> std::size_t& { return c.sampler.guidance.cg_max_iter; });
    num("guidance", "cg_tol", [](TaskConfig& c) -> double& { return c.sampler.guidance.cg_tol; });
    t.push_back({"guidance", "propagation",
                 [](const TaskConfig& c) { return enum_name(c.sampler.guidance.propagation, kPropagations); },
                 [](TaskConfig& c, const std::string& v) {
                   c.sampler.guidance.propagation = parse_enum("propagation", v, kPropagations);
                 }});
    t.push_back({"guidance", "t_min", [](const TaskConfig& c) { return format_double(c.sampler.guidance.schedule.t_min()); },
                 [](TaskConfig& c, const std::string& v) {
                   c.sampler.guidance.schedule = PathSchedule(parse_double("t_min", v), c.sampler.guidance.schedule.t_max());
                 }});
    t.push_back({"guidance", "t_max", [](const TaskConfig& c) { return format_double(c.sampler.guidance.schedule.t_max()); },
                 [](TaskConfig& c, const std::string& v) {
                   c.sampler.guidance.schedule = PathSchedule(c.sampler.guidance.schedule.t_min(), parse_double("t_max", v));
                 }});

    t.push_back({"output", "out_dir", [](const TaskConfig& c) { return c.out_dir; },
                 [](TaskConfig& c, const std::string& v) { c.out_dir = v; }});
    return t;
  }();
  return table;
}

}  // namespace

TaskConfig parse_config(const std::string& text) {
  // Task-dependent defaults first, then overrides.
  std::vector<std::tuple<std::string, std::string, std::string, int>> items;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw Error(ErrorCode::Config, "line " + std::to_string(lineno) + ": bad section header");
      section = trim(body.substr(1, body.size() - 2));
      const bool known = std::any_of(entries().begin(), entries().end(), [&](const Entry& e) { return section == e.section; });
      if (!known) throw Error(ErrorCode::Config, "line " + std::to_string(lineno) + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::Config, "line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty()) throw Error(ErrorCode::Config, "line " + std::to_string(lineno) + ": key outside a section");
    items.emplace_back(section, trim(body.substr(0, eq)), trim(body.substr(eq + 1)), lineno);
  }

  TaskKind kind = TaskKind::GaussianDeblur;
  for (const auto& [sec, key, value, ln] : items)
    if (sec == "task" && key == "kind") kind = parse_task_kind(value);
  TaskConfig config = TaskConfig::defaults(kind);

  for (const auto& [sec, key, value, ln] : items) {
    auto it = std::find_if(entries().begin(), entries().end(),
                           [&](const Entry& e) { return sec == e.section && key == e.key; });
    if (it == entries().end())
      throw Error(ErrorCode::Config, "line " + std::to_string(ln) + ": unknown key '" + key + "' in [" + sec + "]");
    try {
      it->set(config, value);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Config) throw;
      throw Error(ErrorCode::Config, "line " + std::to_string(ln) + ": " + e.what());
    }
  }
  config.sampler.guidance.sigma_y = config.sigma_y;
  return config;
}

TaskConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string dump_config(const TaskConfig& config) {
  std::string out;
  std::string section;
  for (const Entry& e : entries()) {
    if (section != e.section) {
      if (!section.empty()) out += '\n';
      section = e.section;
      out += "[" + section + "]\n";
    }
    out += std::string(e.key) + " = " + e.get(config) + "\n";
  }
  return out;
}

std::string config_hash(const TaskConfig& config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : dump_config(config)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RealField synthetic_image(std::size_t size) {
  RealField img(Shape{size, size});
  const double n = static_cast<double>(size);
  const double quarter = n / 4.0;
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) {
      const double y = (static_cast<double>(i) + 0.5) / n;
      const double x = (static_cast<double>(j) + 0.5) / n;
      double v;
      if (y < 0.5 && x < 0.5) {
        const auto cell = static_cast<long>(x * quarter) + static_cast<long>(y * quarter);
        v = 0.2 + 0.6 * static_cast<double>(cell % 2) + 0.1 * x;
      } else if (y < 0.5) {
        const auto width = 2 + static_cast<std::size_t>(y * 8.0);
        v = 0.15 + 0.7 * static_cast<double>((j / width) % 2);
      } else if (x < 0.5) {
        const double dx = x - 0.25, dy = y - 0.75, rr = dx * dx + dy * dy;
        if (rr < 0.04) {
          const auto sector = static_cast<long>(std::atan2(dy, dx) / std::numbers::pi * 8.0);
          v = sector % 2 == 0 ? 0.1 + 0.5 * rr / 0.04 : 0.9 - 1.5 * rr;
        } else {
          v = 0.25 + 0.3 * y;
        }
      } else if (x < 0.75) {
        v = 0.1 + 0.8 * static_cast<double>((i / 3) % 2);
      } else {
        v = 0.5 + 0.4 * std::sin(12.0 * std::numbers::pi * x * y);
      }
      img.at(i, j) = std::clamp(v, 0.0, 1.0);
    }
  return img;
}

RealField load_task_image(const TaskConfig& config) {
  if (config.image_path.empty()) {
    if (config.synthetic_size == 0) throw Error(ErrorCode::Config, "synthetic_size must be >= 1");
    return synthetic_image(config.synthetic_size);
  }
  return read_image(config.image_path);
}

LinearOperator build_operator(const TaskConfig& config, Shape image_shape) {
  switch (config.task) {
    case TaskKind::GaussianDeblur:
      return LinearOperator::circ_conv(build_gaussian_kernel(config.kernel_size, config.kernel_std), image_shape);
    case TaskKind::MotionDeblur:
      return LinearOperator::circ_conv(
          build_motion_kernel(config.kernel_size, config.motion_angle, config.motion_length), image_shape);
    case TaskKind::SuperResolution:
      return LinearOperator::conv_downsample(build_bicubic_kernel(config.sr_factor), image_shape, config.sr_factor);
    case TaskKind::BoxInpaint: {
      if (config.box_height > image_shape.height || config.box_width > image_shape.width)
        throw Error(ErrorCode::Config, "box larger than image");
      Box box;
      box.height = config.box_height;
      box.width = config.box_width;
      box.top = config.box_top.value_or((image_shape.height - box.height) / 2);
      box.left = config.box_left.value_or((image_shape.width - box.width) / 2);
      return LinearOperator::mask(build_box_mask(image_shape, box));
    }
  }
  throw Error(ErrorCode::Config, "unknown task");
}

DecoderSpec build_decoder(const TaskConfig& config) {
  if (config.decoder_path.empty()) return DecoderSpec::identity();
  return DecoderSpec::linear_from_grid(config.decoder_path);
}

VectorFieldSpec build_field(const TaskConfig& config) { return VectorFieldSpec::analytic_gaussian(config.sigma_latr); }

std::uint64_t sampler_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ULL; }

RealField degrade(const TaskConfig& config, const LinearOperator& op, const RealField& x_true) {
  RealField y = op.apply(x_true);
  SeededRng rng(config.seed);
  y.axpy(config.sigma_y, gaussian_vector(rng, y.shape()));
  return y;
}

RealField degrade(const TaskConfig& config, const RealField& x_true) {
  return degrade(config, build_operator(config, x_true.shape()), x_true);
}

Reconstruction reconstruct(const TaskConfig& config, const RealField& y, Shape image_shape, const RealField* x_true) {
  const auto start = std::chrono::steady_clock::now();
  Reconstruction out;
  RunReport& r = out.report;
  r.task = to_string(config.task);
  r.cov_mode = to_string(config.sampler.guidance.cov_mode);
  r.solver = to_string(config.sampler.solver.kind);
  r.seed = config.seed;
  r.config_hash = config_hash(config);
  r.run_id = r.task + "-" + r.cov_mode + "-" + r.solver + "-s" + std::to_string(config.seed);

  const LinearOperator op = build_operator(config, image_shape);
  if (y.shape() != op.output_shape()) throw Error(ErrorCode::ShapeMismatch, "measurement shape does not match the task");
  const DecoderSpec dec = build_decoder(config);
  const VectorFieldSpec field = build_field(config);
  SamplerConfig sampler = config.sampler;
  sampler.guidance.sigma_y = config.sigma_y;
  sampler.seed = sampler_seed(config.seed);

  try {
    SeededRng rng(sampler.seed);
    SampleResult sample = integrate(sampler, field, dec, op, y, rng);
    const RealField z0 = final_denoise(field, sample.z_final, sampler.guidance.schedule.t_min());
    RealField x = dec.decode(z0);
    if (op.kind() == LinearOperator::Kind::Mask) x = inpaint_splice(op.mask_field(), op.adjoint(y), x);
    if (!x.all_finite()) throw Error(ErrorCode::NonFinite, "reconstruction contains non-finite values");
    out.x_hat = std::move(x);
    r.nfe = sample.trajectory.nfe;
    r.clamp_events = sample.trajectory.clamp_events;
    if (sample.isotropic_on_nonisometric) r.status = "ok_isotropic_warning";
    out.trajectory = std::move(sample.trajectory);
  } catch (const SamplerError& e) {
    r.status = std::string("failed:") + to_string(e.code());
    r.nfe = e.trajectory().nfe;
    r.clamp_events = e.trajectory().clamp_events;
    out.trajectory = e.trajectory();
  } catch (const Error& e) {
    r.status = std::string("failed:") + to_string(e.code());
  }

  if (x_true && out.x_hat.size() > 0) {
    r.mse = mse(out.x_hat, *x_true);
    r.psnr_db = psnr(out.x_hat, *x_true, 1.0);
    r.ssim = ssim(out.x_hat, *x_true, 1.0);
  } else if (out.x_hat.size() == 0) {
    r.mse = r.psnr_db = r.ssim = std::nan("");
  }
  r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<RunReport> bench_cov_modes(const TaskConfig& config, const std::vector<CovarianceMode>& modes) {
  if (modes.empty()) throw Error(ErrorCode::InvalidArgument, "bench_cov_modes: need at least one mode");
  const RealField x_true = load_task_image(config);
  const LinearOperator op = build_operator(config, x_true.shape());
  const RealField y = degrade(config, op, x_true);

  std::vector<RunReport> reports(modes.size());
  auto run = [&](std::size_t i) {
    TaskConfig c = config;
    c.sampler.guidance.cov_mode = modes[i];
    reports[i] = reconstruct(c, y, x_true.shape(), &x_true).report;
  };
  const std::size_t threads = std::min(oracle::thread_budget(), modes.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < modes.size(); ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < modes.size(); i += threads) run(i);
      });
    for (auto& th : pool) th.join();
  }
  return reports;
}

}  // namespace lflow
