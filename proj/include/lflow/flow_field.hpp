#pragma once

// Velocity fields on the conditional-OT path and the posterior moments they
// induce through Tweedie's formulas.
//
// Convention: every field is a forward velocity, v(z_t, t) = E[z1 - z0 | z_t].
// Under it the posterior mean is z_t - t v and integrating from t_s down to 0
// runs the flow in reverse.

#include <functional>
#include <string>
#include <string_view>

#include "lflow/field.hpp"

namespace lflow {

struct VectorFieldSpec {
  enum class Kind { AnalyticGaussian, ExternalCallback };
  using Callback = std::function<RealField(const RealField&, double)>;

  Kind kind = Kind::AnalyticGaussian;
  /// Prior scale for AnalyticGaussian; the Gaussian surrogate scale used for
  /// covariance and mean-Jacobian factors when kind is ExternalCallback.
  double sigma_latr = 1.0;
  Callback callback;

  static VectorFieldSpec analytic_gaussian(double sigma_latr = 1.0);
  static VectorFieldSpec external(Callback cb, double surrogate_sigma_latr = 1.0);
};

/// s(t) such that the Gaussian-prior optimal field is v(z, t) = s(t) z.
double gaussian_field_scale(double sigma_latr, double t);

RealField eval_field(const VectorFieldSpec& spec, const RealField& z, double t);

/// Tweedie: E[z0 | z_t] = z_t - t v(z_t, t).
RealField posterior_mean(const VectorFieldSpec& spec, const RealField& z, double t);

/// Jacobian scalar of the field (exact for AnalyticGaussian, surrogate otherwise).
double field_jacobian_scalar(const VectorFieldSpec& spec, double t);

/// d E[z0|z_t] / d z_t = 1 - t * field Jacobian.
double mean_jacobian_scalar(const VectorFieldSpec& spec, double t);

struct CovarianceMode {
  enum class Kind { LFlowOracle, Eq17AsPrinted, PiGDM, Zero };

  Kind kind = Kind::LFlowOracle;
  double sigma_data = 1.0;  // PiGDM only

  static CovarianceMode lflow() { return {Kind::LFlowOracle, 1.0}; }
  static CovarianceMode eq17() { return {Kind::Eq17AsPrinted, 1.0}; }
  static CovarianceMode pigdm(double sigma_data = 1.0) { return {Kind::PiGDM, sigma_data}; }
  static CovarianceMode zero() { return {Kind::Zero, 1.0}; }

  friend bool operator==(const CovarianceMode&, const CovarianceMode&) = default;
};

/// "lflow", "eq17", "pigdm", "zero".
std::string to_string(const CovarianceMode& mode);
CovarianceMode parse_covariance_mode(std::string_view name);

/// Isotropic latent posterior variance r^2(t).
///
/// LFlowOracle evaluates t^2/(1-t) * (1 - t * J(t)) with J the field Jacobian
/// scalar, which for the Gaussian prior equals the exact conditional variance.
/// Eq17AsPrinted is t^2 (a (1 - 2t) + 2t^2) / (a (a^2 + t^2)) with a = 1 - t,
/// independent of sigma_latr; it diverges as t -> 1. PiGDM is
/// sigma_d^2 sigma(t)^2 / (alpha(t)^2 sigma_d^2 + sigma(t)^2).
/// `field` may be null, in which case sigma_latr = 1 is assumed.
double posterior_cov_scalar(const CovarianceMode& mode, double t, const VectorFieldSpec* field = nullptr);

struct JacobianBounds {
  double lower;
  double upper;
};

/// Sandwich bounds on the field Jacobian for a gamma-strongly log-concave prior:
/// lower = d/dt 1/2 log(alpha^2 + gamma sigma^2), upper = d/dt log sigma.
JacobianBounds jacobian_bounds(double gamma, double t);

}  // namespace lflow
