#pragma once

// Posterior-guided ODE sampling: start from a partially noised encoding of the
// measurement at t_s and integrate the corrected velocity down to t_min.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lflow/decoder.hpp"
#include "lflow/field.hpp"
#include "lflow/flow_field.hpp"
#include "lflow/guidance.hpp"
#include "lflow/operators.hpp"

namespace lflow {

struct SolverConfig {
  enum class Kind { Euler, Heun, AdaptiveHeun };

  Kind kind = Kind::AdaptiveHeun;
  std::size_t steps = 50;  // fixed-step solvers
  double atol = 1e-5;
  double rtol = 1e-5;
  double h_init = 0.0;  // 0: (t_start - t_end) / 50
  double h_min = 1e-12;
  std::size_t max_steps = 200000;  // attempted steps, accepted or not
  double safety = 0.9;
  double factor_min = 0.2;
  double factor_max = 5.0;
};

std::string to_string(SolverConfig::Kind kind);
SolverConfig::Kind parse_solver_kind(std::string_view name);

struct SamplerConfig {
  enum class InitMode { EncodedMeasurement, PureNoise };

  double t_s = 0.8;
  SolverConfig solver{};
  GuidanceSpec guidance{};
  std::uint64_t seed = 0;
  InitMode init_mode = InitMode::EncodedMeasurement;
  bool record_states = false;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::size_t> nfe_cumulative;
  std::vector<double> state_norms;
  std::vector<double> residual_norms;
  std::vector<RealField> states;  // only when recording
  std::size_t nfe = 0;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  std::size_t clamp_events = 0;
};

/// Raised when integration cannot finish; carries the last accepted state.
class SamplerError : public Error {
 public:
  SamplerError(ErrorCode code, const std::string& what, RealField last_state, double last_t, Trajectory traj)
      : Error(code, what), last_state_(std::move(last_state)), last_t_(last_t), traj_(std::move(traj)) {}

  const RealField& last_state() const { return last_state_; }
  double last_t() const { return last_t_; }
  const Trajectory& trajectory() const { return traj_; }

 private:
  RealField last_state_;
  double last_t_;
  Trajectory traj_;
};

using OdeRhs = std::function<RealField(const RealField&, double)>;

struct OdeResult {
  RealField state;
  Trajectory trajectory;
};

/// Integrates dz/dt = rhs(z, t) from t_start down to t_end < t_start.
/// `residual_probe`, if set, is sampled after every accepted step.
OdeResult integrate_ode(const OdeRhs& rhs, RealField z, double t_start, double t_end, const SolverConfig& config,
                        bool record_states = false, const std::function<double()>& residual_probe = {});

/// Measurement lifted into data space: zero-fill for masks, passthrough for
/// convolutions, s^2-scaled adjoint for convolve-downsample, A^T y for dense.
RealField lift_measurement(const LinearOperator& op, const RealField& y);

RealField init_state(const SamplerConfig& config, const DecoderSpec& dec, const LinearOperator& op,
                     const RealField& y, SeededRng& rng);

struct SampleResult {
  RealField z_final;
  Trajectory trajectory;
  bool isotropic_on_nonisometric = false;
};

/// Runs initialisation and integration; the rng is seeded by the caller.
SampleResult integrate(const SamplerConfig& config, const VectorFieldSpec& field, const DecoderSpec& dec,
                       const LinearOperator& op, const RealField& y, SeededRng& rng);

/// One Tweedie step from t_min to 0.
RealField final_denoise(const VectorFieldSpec& field, const RealField& z, double t_min);

/// Observed pixels from the zero-filled measurement, the rest from `decoded`.
RealField inpaint_splice(const RealField& mask, const RealField& y_zero_filled, const RealField& decoded);

/// Columns: t,nfe_cumulative,state_norm,residual_norm
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

}  // namespace lflow
