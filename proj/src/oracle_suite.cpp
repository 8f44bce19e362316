#include "lflow/oracle_suite.hpp"

#include <algorithm>
#include <cmath>

#include "lflow/flow_field.hpp"
#include "lflow/guidance.hpp"
#include "lflow/operators.hpp"
#include "lflow/oracle.hpp"
#include "lflow/sampler.hpp"

namespace lflow {

namespace {

CheckResult verdict(std::string name, double measured, double threshold, std::string detail = {}) {
  return {std::move(name), measured <= threshold, measured, threshold, std::move(detail)};
}

std::vector<double> time_grid() {
  std::vector<double> ts;
  for (int i = 1; i <= 19; ++i) ts.push_back(0.05 * i);
  return ts;
}

double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

CheckResult check_tweedie() {
  SeededRng rng(11);
  double worst = 0.0;
  for (double sigma : {0.5, 1.0, 2.0}) {
    const auto field = VectorFieldSpec::analytic_gaussian(sigma);
    for (double t : time_grid()) {
      const RealField z = gaussian_vector(rng, 6);
      const auto exact = oracle::prior_conditional(sigma, t);
      const RealField mean = posterior_mean(field, z, t);
      for (std::size_t i = 0; i < z.size(); ++i) worst = std::max(worst, std::abs(mean[i] - exact.mean_scale * z[i]));
      worst = std::max(worst, std::abs(posterior_cov_scalar(CovarianceMode::lflow(), t, &field) - exact.variance));
    }
  }
  return verdict("tweedie_mean_and_variance", worst, 1e-12);
}

CheckResult check_cov_modes() {
  const double e = std::max({std::abs(posterior_cov_scalar(CovarianceMode::eq17(), 0.5) - 0.5),
                             std::abs(posterior_cov_scalar(CovarianceMode::lflow(), 0.5) - 0.5),
                             std::abs(posterior_cov_scalar(CovarianceMode::eq17(), 0.25) - 1.0 / 15.0),
                             std::abs(posterior_cov_scalar(CovarianceMode::lflow(), 0.25) - 0.1),
                             std::abs(posterior_cov_scalar(CovarianceMode::pigdm(1.0), 0.25) - 0.1)});
  return verdict("covariance_mode_table", e, 1e-12);
}

CheckResult check_jacobian_bounds() {
  double worst = 0.0;
  bool inside = true;
  for (double sigma : {0.5, 1.0, 2.0}) {
    const auto field = VectorFieldSpec::analytic_gaussian(sigma);
    for (double t : time_grid()) {
      const auto b = jacobian_bounds(1.0 / (sigma * sigma), t);
      const double j = field_jacobian_scalar(field, t);
      inside = inside && j >= b.lower - 1e-12 && j < b.upper;
      worst = std::max(worst, std::abs(j - b.lower));
    }
  }
  auto r = verdict("jacobian_lower_bound_tight", worst, 1e-12);
  r.passed = r.passed && inside;
  if (!inside) r.detail = "Jacobian outside [lower, upper)";
  return r;
}

CheckResult check_closed_forms() {
  const Shape grid{16, 16};
  const Kernel k = build_gaussian_kernel(3, 1.0);
  SeededRng rng(5);
  RealField mask(grid);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.uniform() < 0.7 ? 1.0 : 0.0;
  const std::vector<LinearOperator> ops = {LinearOperator::mask(mask), LinearOperator::circ_conv(k, grid),
                                           LinearOperator::conv_downsample(k, grid, 2)};
  double worst = 0.0;
  for (const auto& op : ops) {
    const Eigen::MatrixXd A = dense_materialize(op);
    for (double r2 : {0.0, 0.1, 1.0})
      for (double sy : {0.01, 0.1}) {
        const RealField res = gaussian_vector(rng, op.output_shape());
        const auto closed = oracle::to_vector(inner_vector(op, res, sy, r2, GuidanceSpec::Solver::ClosedForm));
        const auto cg =
            oracle::to_vector(inner_vector(op, res, sy, r2, GuidanceSpec::Solver::ConjugateGradient, 5000, 1e-12));
        const auto dense = oracle::dense_inner_vector(A, oracle::to_vector(res), sy, r2);
        worst = std::max({worst, relative_error(closed, dense), relative_error(cg, dense), relative_error(closed, cg)});
      }
  }
  return verdict("closed_form_cg_dense_agreement", worst, 1e-8);
}

CheckResult check_guidance_exactness() {
  SeededRng rng(21);
  oracle::LinearGaussianModel model;
  model.A = Eigen::MatrixXd(5, 8);
  for (Eigen::Index i = 0; i < model.A.size(); ++i) model.A.data()[i] = rng.normal() / std::sqrt(8.0);
  model.sigma_y = 0.1;
  const auto field = VectorFieldSpec::analytic_gaussian(1.0);
  const auto op = LinearOperator::dense(model.A);
  GuidanceSpec spec;
  spec.sigma_y = model.sigma_y;
  spec.solver = GuidanceSpec::Solver::ConjugateGradient;
  spec.cg_tol = 1e-14;

  const RealField y = gaussian_vector(rng, 5);
  double worst = 0.0;
  for (double t : {0.2, 0.5, 0.8}) {
    const RealField z = gaussian_vector(rng, 8);
    const auto got = oracle::to_vector(likelihood_gradient(spec, field, model.decoder, op, y, z, t));
    const auto want = oracle::dense_guidance(model, oracle::to_vector(y), oracle::to_vector(z), t, CovarianceMode::lflow());
    worst = std::max(worst, (got - want).cwiseAbs().maxCoeff() / std::max(1.0, want.cwiseAbs().maxCoeff()));
  }
  return verdict("guidance_matches_gaussian_marginal", worst, 1e-10);
}

double heun_endpoint_error(SolverConfig::Kind kind, std::size_t steps) {
  // dz/dt = s(t) z has z(t) = z(t0) sqrt(D(t) / D(t0)), D = (1-t)^2 sigma^2 + t^2.
  const double sigma = 0.5;
  const auto field = VectorFieldSpec::analytic_gaussian(sigma);
  SolverConfig cfg;
  cfg.kind = kind;
  cfg.steps = steps;
  const auto rhs = [&](const RealField& z, double t) { return eval_field(field, z, t); };
  const auto res = integrate_ode(rhs, RealField::vector({1.0}), 0.9, 0.1, cfg);
  auto D = [&](double t) { return (1 - t) * (1 - t) * sigma * sigma + t * t; };
  return std::abs(res.state[0] - std::sqrt(D(0.1) / D(0.9)));
}

CheckResult check_integrator_order() {
  const double heun = heun_endpoint_error(SolverConfig::Kind::Heun, 20) / heun_endpoint_error(SolverConfig::Kind::Heun, 40);
  const double euler =
      heun_endpoint_error(SolverConfig::Kind::Euler, 20) / heun_endpoint_error(SolverConfig::Kind::Euler, 40);
  CheckResult r{"integrator_order", heun >= 3.3 && heun <= 4.7 && euler >= 1.7 && euler <= 2.3, heun, 4.7,
                "heun ratio " + std::to_string(heun) + ", euler ratio " + std::to_string(euler)};
  return r;
}

}  // namespace

std::vector<CheckResult> run_block_downsampling(const std::vector<std::size_t>& sizes, const std::vector<std::size_t>& factors) {
  std::vector<CheckResult> out;
  for (std::size_t n : sizes)
    for (std::size_t s : factors) {
      if (n % s != 0) continue;
      out.push_back(verdict("block_downsample_n" + std::to_string(n) + "_s" + std::to_string(s), block_downsample_check(n, s, n * 31 + s),
                            1e-10));
    }
  return out;
}

std::vector<CheckResult> run_oracle_suite() {
  std::vector<CheckResult> out = {check_tweedie(), check_cov_modes(), check_jacobian_bounds(), check_closed_forms(),
                                  check_guidance_exactness(), check_integrator_order()};
  for (auto& r : run_block_downsampling({8, 16, 64}, {2, 4})) out.push_back(std::move(r));
  return out;
}

}  // namespace lflow
