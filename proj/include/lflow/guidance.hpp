#pragma once

// Measurement-likelihood guidance.
//
// For a linear operator A, decoder D and isotropic posterior variance r^2(t),
//
//   grad_z log p(y | z_t) ~= c(t) * J_D^T A^T S^-1 (y - A D(mean)),
//   S = sigma_y^2 I + r^2(t) A A^T,
//
// where mean = E[z0 | z_t] and c(t) = d mean / d z_t. The measurement-space
// solve has closed forms for masks, circular convolutions and
// convolve-then-downsample; everything else goes through conjugate gradient.

#include <cstddef>
#include <functional>

#include "lflow/decoder.hpp"
#include "lflow/field.hpp"
#include "lflow/flow_field.hpp"
#include "lflow/operators.hpp"
#include "lflow/schedule.hpp"

namespace lflow {

struct CgResult {
  RealField solution;
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

/// Solves S x = b for symmetric positive definite S given as a matvec.
/// Zero initial guess; stops when ||r|| <= tol * ||b||. Throws CgNoConvergence
/// when the budget runs out or a non-positive curvature direction shows up.
CgResult conjugate_gradient(const std::function<RealField(const RealField&)>& apply_system, const RealField& rhs,
                            std::size_t max_iter, double tol);

struct GuidanceSpec {
  enum class Solver { ClosedForm, ConjugateGradient };
  /// Refresh recomputes the posterior mean from the latest corrected velocity
  /// on every inner step; Literal repeats the identical update K times.
  enum class InnerLoop { Refresh, Literal };
  /// Isotropic uses r^2 I in data space; DecoderJacobian uses r^2 J J^T.
  enum class Propagation { Isotropic, DecoderJacobian };

  CovarianceMode cov_mode = CovarianceMode::lflow();
  Solver solver = Solver::ClosedForm;
  std::size_t cg_max_iter = 500;
  double cg_tol = 1e-10;
  double sigma_y = 0.01;
  std::size_t K = 2;
  InnerLoop inner_loop = InnerLoop::Literal;
  Propagation propagation = Propagation::Isotropic;
  PathSchedule schedule{};
};

struct GuidanceDiagnostics {
  std::size_t clamp_events = 0;
  std::size_t cg_iterations = 0;
  std::size_t gradient_evals = 0;
  bool isotropic_on_nonisometric = false;
  double last_residual_norm = 0.0;
};

/// A^T (sigma_y^2 I + r2 A A^T)^-1 residual.
RealField inner_vector(const LinearOperator& op, const RealField& residual, double sigma_y, double r2,
                       GuidanceSpec::Solver solver = GuidanceSpec::Solver::ClosedForm, std::size_t cg_max_iter = 500,
                       double cg_tol = 1e-10, GuidanceDiagnostics* diag = nullptr);

/// Likelihood gradient with the posterior mean supplied by the caller.
RealField likelihood_gradient_at_mean(const GuidanceSpec& spec, const VectorFieldSpec& field, const DecoderSpec& dec,
                                      const LinearOperator& op, const RealField& y, const RealField& mean, double t,
                                      GuidanceDiagnostics* diag = nullptr);

RealField likelihood_gradient(const GuidanceSpec& spec, const VectorFieldSpec& field, const DecoderSpec& dec,
                              const LinearOperator& op, const RealField& y, const RealField& z, double t,
                              GuidanceDiagnostics* diag = nullptr);

/// v(z, t) - t/(1-t) grad log p(y | z_t), refined over spec.K inner steps.
/// K = 0 returns the unconditional field.
RealField corrected_velocity(const GuidanceSpec& spec, const VectorFieldSpec& field, const DecoderSpec& dec,
                             const LinearOperator& op, const RealField& y, const RealField& z, double t,
                             GuidanceDiagnostics* diag = nullptr);

}  // namespace lflow
