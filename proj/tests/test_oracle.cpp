#include <doctest.h>

#include <cmath>

#include "lflow/guidance.hpp"
#include "lflow/oracle.hpp"
#include "lflow/oracle_suite.hpp"

using namespace lflow;
using namespace lflow::oracle;

namespace {

LinearGaussianModel random_model(std::uint64_t seed, Eigen::Index m, Eigen::Index n, double sigma_y) {
  SeededRng rng(seed);
  LinearGaussianModel model;
  model.A = Eigen::MatrixXd(m, n);
  for (Eigen::Index i = 0; i < model.A.size(); ++i) model.A.data()[i] = rng.normal();
  model.sigma_y = sigma_y;
  return model;
}

}  // namespace

TEST_CASE("exact posterior examples") {
  LinearGaussianModel one;
  one.A = Eigen::MatrixXd::Ones(1, 1);
  one.sigma_y = 1.0;
  const auto p = exact_posterior(one, Eigen::VectorXd::Constant(1, 2.0));
  CHECK(p.mean[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(p.cov(0, 0) == doctest::Approx(0.5).epsilon(1e-14));

  LinearGaussianModel partial;
  partial.A = Eigen::MatrixXd(1, 2);
  partial.A << 1.0, 0.0;
  partial.sigma_y = 1e-6;
  const auto q = exact_posterior(partial, Eigen::VectorXd::Constant(1, 3.0));
  CHECK(std::abs(q.mean[0] - 3.0) < 1e-9);
  CHECK(std::abs(q.mean[1]) < 1e-15);
  CHECK(std::abs(q.cov(0, 0)) < 1e-9);
  CHECK(q.cov(1, 1) == doctest::Approx(1.0));
  partial.sigma_y = 0.0;
  const auto q0 = exact_posterior(partial, Eigen::VectorXd::Constant(1, 3.0));
  CHECK(q0.mean[0] == doctest::Approx(3.0));
  CHECK(std::abs(q0.cov(0, 0)) < 1e-12);

  const auto model = random_model(4, 3, 5, 0.2);
  const auto z = exact_posterior(model, Eigen::VectorXd::Zero(3));
  CHECK(z.mean.cwiseAbs().maxCoeff() == 0.0);
  CHECK((z.cov - exact_posterior(model, Eigen::VectorXd::Ones(3)).cov).norm() == 0.0);
}

TEST_CASE("posterior routes agree") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto model = random_model(seed, 4, 7, 0.05 + 0.1 * static_cast<double>(seed));
    model.prior_std = 0.5 + 0.3 * static_cast<double>(seed);
    SeededRng rng(seed + 100);
    const Eigen::VectorXd y = to_vector(gaussian_vector(rng, 4));
    const auto a = exact_posterior(model, y);
    const auto b = exact_posterior_measurement_form(model, y);
    CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((a.cov - b.cov).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("dense guidance") {
  const auto model = random_model(2, 5, 8, 0.1);
  SeededRng rng(8);
  const Eigen::VectorXd z = to_vector(gaussian_vector(rng, 8));
  const double c = (1 - 0.3) / ((1 - 0.3) * (1 - 0.3) + 0.09);
  const Eigen::VectorXd y = model.A * (c * z);
  CHECK(dense_guidance(model, y, z, 0.3, CovarianceMode::lflow()).cwiseAbs().maxCoeff() < 1e-12);

  LinearGaussianModel id;
  id.A = Eigen::MatrixXd::Identity(3, 3);
  id.sigma_y = 1.0;
  const Eigen::VectorXd zz = Eigen::Vector3d(1.0, -2.0, 0.5);
  const Eigen::VectorXd yy = Eigen::Vector3d(0.0, 1.0, 2.0);
  const Eigen::VectorXd g = dense_guidance(id, yy, zz, 0.5, CovarianceMode::lflow());
  CHECK((g - (yy - zz) / 1.5).cwiseAbs().maxCoeff() < 1e-14);

  for (double t : {0.2, 0.5, 0.8}) {
    const Eigen::VectorXd want = dense_guidance(model, y, z, t, CovarianceMode::lflow());
    GuidanceSpec spec;
    spec.sigma_y = model.sigma_y;
    spec.solver = GuidanceSpec::Solver::ConjugateGradient;
    spec.cg_tol = 1e-14;
    const auto got = likelihood_gradient(spec, VectorFieldSpec::analytic_gaussian(1.0), model.decoder,
                                         LinearOperator::dense(model.A), to_field(y), to_field(z), t);
    CHECK((to_vector(got) - want).cwiseAbs().maxCoeff() < 1e-10);
  }

  LinearGaussianModel big;
  big.A = Eigen::MatrixXd::Identity(600, 600);
  CHECK_THROWS_AS(dense_guidance(big, Eigen::VectorXd::Zero(600), Eigen::VectorXd::Zero(600), 0.5, CovarianceMode::lflow()),
                  Error);
}

TEST_CASE("guidance is the marginal log-likelihood gradient") {
  const auto model = random_model(6, 5, 8, 0.3);
  SeededRng rng(1);
  const Eigen::VectorXd y = to_vector(gaussian_vector(rng, 5));
  const RealField z = gaussian_vector(rng, 8);
  for (double t : {0.25, 0.6}) {
    const Eigen::VectorXd g = dense_guidance(model, y, to_vector(z), t, CovarianceMode::lflow());
    Eigen::VectorXd fd(8);
    const double h = 1e-5;
    for (int j = 0; j < 8; ++j) {
      Eigen::VectorXd zp = to_vector(z), zm = zp;
      zp[j] += h;
      zm[j] -= h;
      fd[j] = (marginal_log_likelihood(model, y, zp, t) - marginal_log_likelihood(model, y, zm, t)) / (2 * h);
    }
    CHECK((fd - g).cwiseAbs().maxCoeff() < 1e-5 * std::max(1.0, g.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("finite difference Jacobians") {
  SeededRng rng(3);
  const RealField at = gaussian_vector(rng, 5);
  const auto eye = finite_diff_jacobian([](const RealField& x) { return x; }, at, 1e-3);
  CHECK((eye - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-10);

  const auto field = VectorFieldSpec::analytic_gaussian(0.7);
  const double t = 0.35;
  const auto jf = finite_diff_jacobian([&](const RealField& x) { return eval_field(field, x, t); }, at, 1e-5);
  const double s = field_jacobian_scalar(field, t);
  CHECK((jf - s * Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-6);

  const RealField scale = RealField::vector({0.5, 2.0, -1.0, 3.0, 0.1});
  const auto dec = DecoderSpec::diagonal_scale(scale);
  const auto jd = finite_diff_jacobian([&](const RealField& x) { return dec.decode(x); }, at, 1e-4);
  CHECK((jd - Eigen::MatrixXd(to_vector(scale).asDiagonal())).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("Monte Carlo moments") {
  const auto constant = mc_moments([](std::uint64_t) { return RealField::vector({1.5, -2.0}); }, 50);
  CHECK(constant.cov.cwiseAbs().maxCoeff() == 0.0);
  CHECK(constant.mean[0] == 1.5);

  auto gaussian = [](std::uint64_t seed) {
    SeededRng rng(seed);
    return gaussian_vector(rng, 2);
  };
  const auto a = mc_moments(gaussian, 10000);
  CHECK(a.samples == 10000);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(a.mean[i]) < 3 * a.std_errors[i]);
    CHECK(a.std_errors[i] == doctest::Approx(std::sqrt(a.cov(i, i) / 10000.0)));
  }
  const auto b = mc_moments(gaussian, 10000);
  CHECK(a.mean == b.mean);
  CHECK(a.cov == b.cov);
  const auto c = mc_moments(gaussian, 10000, 0, 4);
  CHECK(a.mean == c.mean);
  CHECK(a.cov == c.cov);
  CHECK_THROWS_AS(mc_moments(gaussian, 1), Error);
}

TEST_CASE("Tweedie cross-check") {
  for (double sigma : {0.5, 1.0, 2.0})
    for (int i = 1; i <= 19; ++i) {
      const double t = 0.05 * i;
      const auto field = VectorFieldSpec::analytic_gaussian(sigma);
      const auto exact = prior_conditional(sigma, t);
      const RealField z = RealField::vector({1.0, -0.5});
      const RealField mean = posterior_mean(field, z, t);
      CHECK(std::abs(mean[0] - exact.mean_scale) < 1e-12);
      CHECK(std::abs(mean[1] + 0.5 * exact.mean_scale) < 1e-12);
      CHECK(std::abs(posterior_cov_scalar(CovarianceMode::lflow(), t, &field) - exact.variance) < 1e-12);
    }
}

TEST_CASE("oracle suite passes") {
  for (const auto& r : run_oracle_suite()) {
    INFO(r.name << " " << r.measured << " " << r.detail);
    CHECK(r.passed);
  }
  CHECK(run_block_downsampling({8}, {3}).empty());
}
