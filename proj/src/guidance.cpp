#include "lflow/guidance.hpp"

#include <cmath>
#include <string>

namespace lflow {

CgResult conjugate_gradient(const std::function<RealField(const RealField&)>& apply_system, const RealField& rhs,
                            std::size_t max_iter, double tol) {
  CgResult result;
  result.solution = RealField(rhs.shape());
  const double b_norm = norm(rhs);
  if (b_norm == 0.0) return result;

  RealField& x = result.solution;
  RealField r = rhs;
  RealField p = r;
  double rr = dot(r, r);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    const RealField q = apply_system(p);
    const double curvature = dot(p, q);
    if (!(curvature > 0.0))
      throw Error(ErrorCode::CgNoConvergence, "non-positive curvature at iteration " + std::to_string(it) +
                                                  " (system not positive definite)");
    const double alpha = rr / curvature;
    x.axpy(alpha, p);
    r.axpy(-alpha, q);
    const double rr_new = dot(r, r);
    result.iterations = it;
    result.relative_residual = std::sqrt(rr_new) / b_norm;
    if (result.relative_residual <= tol) return result;
    p *= rr_new / rr;
    p += r;
    rr = rr_new;
  }
  throw Error(ErrorCode::CgNoConvergence, "iterations=" + std::to_string(result.iterations) +
                                              " relative residual=" + std::to_string(result.relative_residual));
}

namespace {

void require_positive_system(double sigma_y, double r2) {
  if (!(sigma_y >= 0.0) || !(r2 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma_y and r2 must be >= 0");
  if (sigma_y == 0.0 && r2 == 0.0)
    throw Error(ErrorCode::SingularSystem, "sigma_y = 0 and r^2 = 0 leave the guidance system singular");
}

RealField solve_with_cg(const std::function<RealField(const RealField&)>& system, const RealField& residual,
                        std::size_t max_iter, double tol, GuidanceDiagnostics* diag) {
  CgResult cg = conjugate_gradient(system, residual, max_iter, tol);
  if (diag) diag->cg_iterations += cg.iterations;
  return std::move(cg.solution);
}

RealField circ_conv_closed_form(const LinearOperator& op, const RealField& residual, double s2, double r2) {
  const ComplexSpectrum& k = op.kernel_spectrum();
  ComplexSpectrum rs = dft2_forward(residual);
  for (std::size_t i = 0; i < rs.size(); ++i) rs[i] = std::conj(k[i]) * rs[i] / (s2 + r2 * std::norm(k[i]));
  return dft2_inverse(rs);
}

RealField conv_downsample_closed_form(const LinearOperator& op, const RealField& residual, double s2, double r2) {
  const ComplexSpectrum& k = op.kernel_spectrum();
  const Shape fine = op.input_shape();
  const Shape coarse = op.output_shape();
  const std::size_t sr = op.row_factor(), sc = op.col_factor();

  // (|k_hat|^2) block-averaged over the aliases of each coarse frequency.
  RealField power_avg(coarse);
  for (std::size_t a = 0; a < coarse.height; ++a)
    for (std::size_t b = 0; b < coarse.width; ++b) {
      double acc = 0.0;
      for (std::size_t i = 0; i < sr; ++i)
        for (std::size_t j = 0; j < sc; ++j) acc += std::norm(k.at(a + i * coarse.height, b + j * coarse.width));
      power_avg.at(a, b) = acc / static_cast<double>(sr * sc);
    }

  ComplexSpectrum u = dft2_forward(residual);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] /= (s2 + r2 * power_avg[i]);

  // Zero-insertion upsampling tiles the coarse spectrum; then apply conj(k_hat).
  ComplexSpectrum v(fine);
  for (std::size_t p = 0; p < fine.height; ++p)
    for (std::size_t q = 0; q < fine.width; ++q)
      v.at(p, q) = std::conj(k.at(p, q)) * u.at(p % coarse.height, q % coarse.width);
  return dft2_inverse(v);
}

}  // namespace

RealField inner_vector(const LinearOperator& op, const RealField& residual, double sigma_y, double r2,
                       GuidanceSpec::Solver solver, std::size_t cg_max_iter, double cg_tol,
                       GuidanceDiagnostics* diag) {
  if (residual.shape() != op.output_shape())
    throw Error(ErrorCode::ShapeMismatch, "inner_vector: residual not in measurement space");
  require_positive_system(sigma_y, r2);
  const double s2 = sigma_y * sigma_y;

  if (solver == GuidanceSpec::Solver::ClosedForm) {
    switch (op.kind()) {
      case LinearOperator::Kind::Mask: {
        RealField v = op.adjoint(residual);
        v *= 1.0 / (s2 + r2);
        return v;
      }
      case LinearOperator::Kind::CircConv:
        return circ_conv_closed_form(op, residual, s2, r2);
      case LinearOperator::Kind::ConvDownsample:
        return conv_downsample_closed_form(op, residual, s2, r2);
      case LinearOperator::Kind::Dense:
        break;
    }
  }

  auto system = [&](const RealField& u) {
    RealField out = op.apply(op.adjoint(u));
    out *= r2;
    out.axpy(s2, u);
    return out;
  };
  return op.adjoint(solve_with_cg(system, residual, cg_max_iter, cg_tol, diag));
}

RealField likelihood_gradient_at_mean(const GuidanceSpec& spec, const VectorFieldSpec& field, const DecoderSpec& dec,
                                      const LinearOperator& op, const RealField& y, const RealField& mean, double t,
                                      GuidanceDiagnostics* diag) {
  bool clamped = false;
  const double tc = spec.schedule.clamp(t, &clamped);
  if (diag) {
    if (clamped) ++diag->clamp_events;
    ++diag->gradient_evals;
  }

  const RealField x = dec.decode(mean);
  const RealField residual = y - op.apply(x);
  if (diag) diag->last_residual_norm = norm(residual);
  const double r2 = posterior_cov_scalar(spec.cov_mode, tc, &field);

  RealField data_grad;
  if (spec.propagation == GuidanceSpec::Propagation::DecoderJacobian && !dec.isometric()) {
    require_positive_system(spec.sigma_y, r2);
    const double s2 = spec.sigma_y * spec.sigma_y;
    auto system = [&](const RealField& u) {
      RealField out = op.apply(dec.jvp(mean, dec.vjp(mean, op.adjoint(u))));
      out *= r2;
      out.axpy(s2, u);
      return out;
    };
    data_grad = op.adjoint(solve_with_cg(system, residual, spec.cg_max_iter, spec.cg_tol, diag));
  } else {
    if (diag && !dec.isometric()) diag->isotropic_on_nonisometric = true;
    data_grad = inner_vector(op, residual, spec.sigma_y, r2, spec.solver, spec.cg_max_iter, spec.cg_tol, diag);
  }

  RealField grad = dec.vjp(mean, data_grad);
  grad *= mean_jacobian_scalar(field, tc);
  return grad;
}

RealField likelihood_gradient(const GuidanceSpec& spec, const VectorFieldSpec& field, const DecoderSpec& dec,
                              const LinearOperator& op, const RealField& y, const RealField& z, double t,
                              GuidanceDiagnostics* diag) {
  const double tc = spec.schedule.clamp(t);
  return likelihood_gradient_at_mean(spec, field, dec, op, y, posterior_mean(field, z, tc), t, diag);
}

RealField corrected_velocity(const GuidanceSpec& spec, const VectorFieldSpec& field, const DecoderSpec& dec,
                             const LinearOperator& op, const RealField& y, const RealField& z, double t,
                             GuidanceDiagnostics* diag) {
  const RealField v0 = eval_field(field, z, t);
  if (spec.K == 0) return v0;
  bool clamped = false;
  const double g = spec.schedule.guidance_coefficient(t, &clamped);
  if (diag && clamped) ++diag->clamp_events;
  const double tc = spec.schedule.clamp(t);

  RealField v = v0;
  for (std::size_t k = 0; k < spec.K; ++k) {
    const RealField& basis = spec.inner_loop == GuidanceSpec::InnerLoop::Refresh ? v : v0;
    RealField mean = z;
    mean.axpy(-tc, basis);
    const RealField grad = likelihood_gradient_at_mean(spec, field, dec, op, y, mean, t, diag);
    RealField next = v0;
    next.axpy(-g, grad);
    v = std::move(next);
  }
  return v;
}

}  // namespace lflow
