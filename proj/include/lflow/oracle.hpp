#pragma once

// Ground truth for the linear-Gaussian model
//   z0 ~ N(0, prior_std^2 I),  y = A M z0 + n,  n ~ N(0, sigma_y^2 I),
// with M the (linear) decoder matrix. Everything here uses dense
// factorisations and never calls the guidance or sampler code it checks.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "lflow/decoder.hpp"
#include "lflow/field.hpp"
#include "lflow/flow_field.hpp"

namespace lflow::oracle {

struct LinearGaussianModel {
  double prior_std = 1.0;
  Eigen::MatrixXd A;
  double sigma_y = 0.1;
  DecoderSpec decoder = DecoderSpec::identity();

  /// Latent dimension; needed for Identity decoders.
  Eigen::Index latent_dim() const;
  Eigen::MatrixXd decoder_matrix() const;
  /// B = A M.
  Eigen::MatrixXd effective_operator() const;
};

struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Precision form: cov = (B^T B / sigma_y^2 + I / prior^2)^-1, mean = cov B^T y / sigma_y^2.
/// With sigma_y = 0 falls back to the measurement-space form (B must have full row rank).
GaussianPosterior exact_posterior(const LinearGaussianModel& model, const Eigen::VectorXd& y);

/// Measurement-space form: mean = p^2 B^T (p^2 B B^T + sigma_y^2 I)^-1 y.
GaussianPosterior exact_posterior_measurement_form(const LinearGaussianModel& model, const Eigen::VectorXd& y);

struct ConditionalMoments {
  double mean_scale;  // E[z0 | z_t] = mean_scale * z_t
  double variance;    // Var[z0 | z_t] per coordinate
};

/// Joint-Gaussian conditioning of z0 on z_t = (1-t) z0 + t z1 for the pure prior.
ConditionalMoments prior_conditional(double prior_std, double t);

enum class Propagation { Isotropic, DecoderJacobian };

/// Eq.-12-style guidance by explicit matrices and a Cholesky solve:
/// c M^T A^T S^-1 (y - A M c z), S = sigma_y^2 I + r2 A A^T (isotropic) or
/// sigma_y^2 I + r2 A M M^T A^T. Dimension guarded at 512.
Eigen::VectorXd dense_guidance(const LinearGaussianModel& model, const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                               double t, const CovarianceMode& mode,
                               Propagation propagation = Propagation::DecoderJacobian);

/// log N(y; A M c z, sigma_y^2 I + r2 A M M^T A^T) with the exact Gaussian c(t), r2(t).
double marginal_log_likelihood(const LinearGaussianModel& model, const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                               double t);

/// Conditional velocity E[z1 - z0 | z_t, y] from the explicit score of
/// p(z_t | y) = N((1-t) mu, (1-t)^2 Sigma + t^2 I).
Eigen::VectorXd conditional_velocity(const LinearGaussianModel& model, const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& z, double t);

/// Direct solve of A^T (sigma_y^2 I + r2 A A^T)^-1 residual with a dense A.
Eigen::VectorXd dense_inner_vector(const Eigen::MatrixXd& A, const Eigen::VectorXd& residual, double sigma_y,
                                   double r2);

using FieldMap = std::function<RealField(const RealField&)>;

/// Central differences; column j is (f(x + h e_j) - f(x - h e_j)) / 2h.
Eigen::MatrixXd finite_diff_jacobian(const FieldMap& f, const RealField& at, double step);

struct McMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // unbiased
  Eigen::VectorXd std_errors;
  std::size_t samples = 0;
};

/// Runs `runner(seed)` for seeds first_seed .. first_seed + n - 1 across up to
/// `threads` workers (0: LFLOW_THREADS or 1) and reduces in seed order, so the
/// result does not depend on the thread count.
McMoments mc_moments(const std::function<RealField(std::uint64_t)>& runner, std::size_t n_seeds,
                     std::uint64_t first_seed = 0, std::size_t threads = 0);

/// LFLOW_THREADS if set and positive, otherwise 1.
std::size_t thread_budget();

Eigen::VectorXd to_vector(const RealField& f);
RealField to_field(const Eigen::VectorXd& v);

}  // namespace lflow::oracle
