#include "lflow/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace lflow {

std::string to_string(SolverConfig::Kind kind) {
  switch (kind) {
    case SolverConfig::Kind::Euler: return "euler";
    case SolverConfig::Kind::Heun: return "heun";
    case SolverConfig::Kind::AdaptiveHeun: return "adaptive";
  }
  return "?";
}

SolverConfig::Kind parse_solver_kind(std::string_view name) {
  if (name == "euler") return SolverConfig::Kind::Euler;
  if (name == "heun") return SolverConfig::Kind::Heun;
  if (name == "adaptive") return SolverConfig::Kind::AdaptiveHeun;
  throw Error(ErrorCode::InvalidArgument, "unknown solver '" + std::string(name) + "'");
}

namespace {

class Recorder {
 public:
  Recorder(bool record_states, const std::function<double()>& probe) : record_states_(record_states), probe_(probe) {}

  void push(Trajectory& traj, double t, const RealField& z) const {
    traj.times.push_back(t);
    traj.nfe_cumulative.push_back(traj.nfe);
    traj.state_norms.push_back(norm(z));
    traj.residual_norms.push_back(probe_ ? probe_() : 0.0);
    if (record_states_) traj.states.push_back(z);
  }

 private:
  bool record_states_;
  const std::function<double()>& probe_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what, const RealField& z, double t, Trajectory& traj) {
  throw SamplerError(code, what, z, t, std::move(traj));
}

RealField evaluate(const OdeRhs& rhs, const RealField& z, double t, Trajectory& traj) {
  RealField v = rhs(z, t);
  ++traj.nfe;
  return v;
}

}  // namespace

OdeResult integrate_ode(const OdeRhs& rhs, RealField z, double t_start, double t_end, const SolverConfig& config,
                        bool record_states, const std::function<double()>& residual_probe) {
  if (!(t_end < t_start)) throw Error(ErrorCode::InvalidArgument, "integrate_ode: need t_end < t_start");
  if (!z.all_finite()) throw Error(ErrorCode::NonFinite, "integrate_ode: non-finite initial state");

  OdeResult result;
  Trajectory& traj = result.trajectory;
  const Recorder recorder(record_states, residual_probe);
  recorder.push(traj, t_start, z);
  double t = t_start;

  if (config.kind != SolverConfig::Kind::AdaptiveHeun) {
    if (config.steps == 0) throw Error(ErrorCode::InvalidArgument, "fixed-step solver needs steps >= 1");
    const double h = (t_start - t_end) / static_cast<double>(config.steps);
    for (std::size_t n = 0; n < config.steps; ++n) {
      const double t_next = (n + 1 == config.steps) ? t_end : t_start - static_cast<double>(n + 1) * h;
      const double dt = t - t_next;
      const RealField k1 = evaluate(rhs, z, t, traj);
      RealField z_next = z;
      z_next.axpy(-dt, k1);
      if (config.kind == SolverConfig::Kind::Heun) {
        const RealField k2 = evaluate(rhs, z_next, t_next, traj);
        z_next = z;
        z_next.axpy(-0.5 * dt, k1);
        z_next.axpy(-0.5 * dt, k2);
      }
      if (!z_next.all_finite()) fail(ErrorCode::NonFinite, "non-finite state", z, t, traj);
      z = std::move(z_next);
      t = t_next;
      ++traj.accepted_steps;
      recorder.push(traj, t, z);
    }
    result.state = std::move(z);
    return result;
  }

  if (!(config.atol > 0.0 && config.rtol > 0.0 && config.h_min > 0.0))
    throw Error(ErrorCode::InvalidArgument, "adaptive solver needs atol, rtol, h_min > 0");
  double h = config.h_init > 0.0 ? config.h_init : (t_start - t_end) / 50.0;
  std::size_t attempts = 0;
  RealField k1 = evaluate(rhs, z, t, traj);
  while (t > t_end) {
    if (attempts++ >= config.max_steps)
      fail(ErrorCode::MaxStepsExceeded, "max_steps=" + std::to_string(config.max_steps) + " at t=" + std::to_string(t),
           z, t, traj);
    h = std::min(h, t - t_end);
    const double t_next = (t - h <= t_end) ? t_end : t - h;
    const double dt = t - t_next;

    RealField z_euler = z;
    z_euler.axpy(-dt, k1);
    const RealField k2 = evaluate(rhs, z_euler, t_next, traj);
    RealField z_heun = z;
    z_heun.axpy(-0.5 * dt, k1);
    z_heun.axpy(-0.5 * dt, k2);

    double err = 0.0;
    bool finite = z_heun.all_finite();
    if (finite) {
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double scale = config.atol + config.rtol * std::max(std::abs(z[i]), std::abs(z_heun[i]));
        const double e = (z_heun[i] - z_euler[i]) / scale;
        err += e * e;
      }
      err = z.size() ? std::sqrt(err / static_cast<double>(z.size())) : 0.0;
      finite = std::isfinite(err);
    }
    // A non-finite trial is treated as a maximal rejection.
    const double factor =
        !finite ? config.factor_min
        : err == 0.0 ? config.factor_max
                     : std::clamp(config.safety / std::sqrt(err), config.factor_min, config.factor_max);

    if (finite && err <= 1.0) {
      z = std::move(z_heun);
      t = t_next;
      ++traj.accepted_steps;
      recorder.push(traj, t, z);
      h = dt * factor;
      if (t > t_end) k1 = evaluate(rhs, z, t, traj);
    } else {
      ++traj.rejected_steps;
      h = dt * factor;
      if (h < config.h_min)
        fail(ErrorCode::StepUnderflow, "h=" + std::to_string(h) + " below h_min at t=" + std::to_string(t), z, t,
             traj);
    }
  }
  result.state = std::move(z);
  return result;
}

RealField lift_measurement(const LinearOperator& op, const RealField& y) {
  switch (op.kind()) {
    case LinearOperator::Kind::Mask: return op.adjoint(y);
    case LinearOperator::Kind::CircConv:
      if (y.shape() != op.output_shape()) throw Error(ErrorCode::ShapeMismatch, "lift_measurement: bad y shape");
      return y;
    case LinearOperator::Kind::ConvDownsample: {
      RealField x = op.adjoint(y);
      x *= static_cast<double>(op.row_factor() * op.col_factor());
      return x;
    }
    case LinearOperator::Kind::Dense: return op.adjoint(y);
  }
  return {};
}

RealField init_state(const SamplerConfig& config, const DecoderSpec& dec, const LinearOperator& op,
                     const RealField& y, SeededRng& rng) {
  const RealField encoded = dec.encode(lift_measurement(op, y));
  const RealField z1 = gaussian_vector(rng, encoded.shape());
  if (config.init_mode == SamplerConfig::InitMode::PureNoise) return z1;
  const double ts = config.guidance.schedule.clamp(config.t_s);
  RealField z = (1.0 - ts) * encoded;
  z.axpy(ts, z1);
  return z;
}

SampleResult integrate(const SamplerConfig& config, const VectorFieldSpec& field, const DecoderSpec& dec,
                       const LinearOperator& op, const RealField& y, SeededRng& rng) {
  const PathSchedule& schedule = config.guidance.schedule;
  bool clamped = false;
  const double t_start = schedule.clamp(config.t_s, &clamped);
  const double t_end = schedule.t_min();
  if (!(t_start > t_end)) throw Error(ErrorCode::InvalidArgument, "t_s must exceed t_min");

  GuidanceDiagnostics diag;
  if (clamped) ++diag.clamp_events;
  RealField z = init_state(config, dec, op, y, rng);

  auto rhs = [&](const RealField& state, double t) {
    return corrected_velocity(config.guidance, field, dec, op, y, state, t, &diag);
  };
  auto probe = [&diag] { return diag.last_residual_norm; };

  SampleResult out;
  try {
    OdeResult ode = integrate_ode(rhs, std::move(z), t_start, t_end, config.solver, config.record_states, probe);
    out.z_final = std::move(ode.state);
    out.trajectory = std::move(ode.trajectory);
  } catch (const SamplerError& e) {
    Trajectory traj = e.trajectory();
    traj.clamp_events = diag.clamp_events;
    throw SamplerError(e.code(), e.what(), e.last_state(), e.last_t(), std::move(traj));
  }
  out.trajectory.clamp_events = diag.clamp_events;
  out.isotropic_on_nonisometric = diag.isotropic_on_nonisometric;
  return out;
}

RealField final_denoise(const VectorFieldSpec& field, const RealField& z, double t_min) {
  return posterior_mean(field, z, t_min);
}

RealField inpaint_splice(const RealField& mask, const RealField& y_zero_filled, const RealField& decoded) {
  require_same_shape(mask, y_zero_filled, "inpaint_splice");
  require_same_shape(mask, decoded, "inpaint_splice");
  RealField out(mask.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask[i] * y_zero_filled[i] + (1.0 - mask[i]) * decoded[i];
  return out;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "t,nfe_cumulative,state_norm,residual_norm\n";
  char line[160];
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    std::snprintf(line, sizeof line, "%.9g,%zu,%.9g,%.9g\n", traj.times[i], traj.nfe_cumulative[i],
                  traj.state_norms[i], traj.residual_norms[i]);
    out << line;
  }
}

}  // namespace lflow
