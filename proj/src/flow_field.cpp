#include "lflow/flow_field.hpp"

#include <exception>
#include <string>

namespace lflow {

namespace {

void require_time(double t, const char* where) {
  if (!(t >= 0.0 && t <= 1.0))
    throw Error(ErrorCode::OutOfRange, std::string(where) + ": t=" + std::to_string(t) + " outside [0,1]");
}

}  // namespace

VectorFieldSpec VectorFieldSpec::analytic_gaussian(double sigma_latr) {
  if (!(sigma_latr > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma_latr must be > 0");
  VectorFieldSpec spec;
  spec.kind = Kind::AnalyticGaussian;
  spec.sigma_latr = sigma_latr;
  return spec;
}

VectorFieldSpec VectorFieldSpec::external(Callback cb, double surrogate_sigma_latr) {
  if (!cb) throw Error(ErrorCode::InvalidArgument, "external field needs a callback");
  if (!(surrogate_sigma_latr > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma_latr must be > 0");
  VectorFieldSpec spec;
  spec.kind = Kind::ExternalCallback;
  spec.sigma_latr = surrogate_sigma_latr;
  spec.callback = std::move(cb);
  return spec;
}

double gaussian_field_scale(double sigma_latr, double t) {
  const double s2 = sigma_latr * sigma_latr;
  const double a = 1.0 - t;
  return (t - a * s2) / (a * a * s2 + t * t);
}

RealField eval_field(const VectorFieldSpec& spec, const RealField& z, double t) {
  require_time(t, "eval_field");
  if (spec.kind == VectorFieldSpec::Kind::AnalyticGaussian) {
    return gaussian_field_scale(spec.sigma_latr, t) * z;
  }
  RealField v;
  try {
    v = spec.callback(z, t);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::CallbackFailure, e.what());
  }
  if (v.shape() != z.shape()) throw Error(ErrorCode::CallbackFailure, "callback returned wrong shape");
  if (!v.all_finite()) throw Error(ErrorCode::CallbackFailure, "callback returned non-finite values");
  return v;
}

RealField posterior_mean(const VectorFieldSpec& spec, const RealField& z, double t) {
  RealField mean = z;
  mean.axpy(-t, eval_field(spec, z, t));
  return mean;
}

double field_jacobian_scalar(const VectorFieldSpec& spec, double t) {
  require_time(t, "field_jacobian_scalar");
  return gaussian_field_scale(spec.sigma_latr, t);
}

double mean_jacobian_scalar(const VectorFieldSpec& spec, double t) {
  return 1.0 - t * field_jacobian_scalar(spec, t);
}

std::string to_string(const CovarianceMode& mode) {
  switch (mode.kind) {
    case CovarianceMode::Kind::LFlowOracle: return "lflow";
    case CovarianceMode::Kind::Eq17AsPrinted: return "eq17";
    case CovarianceMode::Kind::PiGDM: return "pigdm";
    case CovarianceMode::Kind::Zero: return "zero";
  }
  return "?";
}

CovarianceMode parse_covariance_mode(std::string_view name) {
  if (name == "lflow") return CovarianceMode::lflow();
  if (name == "eq17") return CovarianceMode::eq17();
  if (name == "pigdm") return CovarianceMode::pigdm();
  if (name == "zero") return CovarianceMode::zero();
  throw Error(ErrorCode::InvalidArgument, "unknown covariance mode '" + std::string(name) + "'");
}

double posterior_cov_scalar(const CovarianceMode& mode, double t, const VectorFieldSpec* field) {
  if (!(t >= 0.0 && t < 1.0))
    throw Error(ErrorCode::OutOfRange, "posterior_cov_scalar: t=" + std::to_string(t) + " outside [0,1)");
  const double a = 1.0 - t;
  switch (mode.kind) {
    case CovarianceMode::Kind::LFlowOracle: {
      const double sigma_latr = field ? field->sigma_latr : 1.0;
      const double jac = gaussian_field_scale(sigma_latr, t);
      return t * t / a * (1.0 - t * jac);
    }
    case CovarianceMode::Kind::Eq17AsPrinted:
      return t * t * (a * (1.0 - 2.0 * t) + 2.0 * t * t) / (a * (a * a + t * t));
    case CovarianceMode::Kind::PiGDM: {
      const double d2 = mode.sigma_data * mode.sigma_data;
      return d2 * t * t / (a * a * d2 + t * t);
    }
    case CovarianceMode::Kind::Zero:
      return 0.0;
  }
  return 0.0;
}

JacobianBounds jacobian_bounds(double gamma, double t) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "jacobian_bounds: gamma must be > 0");
  if (!(t > 0.0 && t < 1.0)) throw Error(ErrorCode::OutOfRange, "jacobian_bounds: t outside (0,1)");
  const double a = 1.0 - t;
  return {(gamma * t - a) / (a * a + gamma * t * t), 1.0 / t};
}

}  // namespace lflow
