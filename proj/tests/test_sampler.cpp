#include <doctest.h>

#include <cmath>
#include <sstream>

#include "lflow/oracle.hpp"
#include "lflow/sampler.hpp"
#include "lflow/task.hpp"

using namespace lflow;

namespace {

double linear_field_error(SolverConfig::Kind kind, std::size_t steps, double sigma) {
  const auto field = VectorFieldSpec::analytic_gaussian(sigma);
  SolverConfig cfg;
  cfg.kind = kind;
  cfg.steps = steps;
  const auto res = integrate_ode([&](const RealField& z, double t) { return eval_field(field, z, t); },
                                 RealField::vector({1.0}), 0.9, 0.1, cfg);
  SolverConfig ref_cfg = cfg;
  ref_cfg.kind = SolverConfig::Kind::Heun;
  ref_cfg.steps = 1000000;
  static double ref = 0.0;
  static double ref_sigma = -1.0;
  if (ref_sigma != sigma) {
    ref = integrate_ode([&](const RealField& z, double t) { return eval_field(field, z, t); }, RealField::vector({1.0}), 0.9,
                        0.1, ref_cfg)
              .state[0];
    ref_sigma = sigma;
  }
  return std::abs(res.state[0] - ref);
}

SamplerConfig prior_config() {
  SamplerConfig cfg;
  cfg.t_s = 1.0 - 1e-3;
  cfg.init_mode = SamplerConfig::InitMode::PureNoise;
  cfg.guidance.sigma_y = 1e6;
  cfg.guidance.K = 1;
  return cfg;
}

}  // namespace

TEST_CASE("init_state blends the encoded measurement with noise") {
  const auto op = LinearOperator::circ_conv(Kernel::delta(), Shape{1, 2});
  const auto dec = DecoderSpec::identity();
  const RealField y = RealField::vector({1.0, 0.0});
  SamplerConfig cfg;
  SeededRng a(9), b(9);
  const RealField z1 = gaussian_vector(b, Shape{1, 2});
  const RealField z = init_state(cfg, dec, op, y, a);
  CHECK(max_abs_diff(z, 0.2 * y + 0.8 * z1) < 1e-15);

  cfg.t_s = 0.0;
  SeededRng c(9);
  CHECK(max_abs_diff(init_state(cfg, dec, op, y, c), y) < 2e-3 * (1.0 + norm(z1)));
  cfg.t_s = 1.0;
  SeededRng d(9);
  CHECK(max_abs_diff(init_state(cfg, dec, op, y, d), z1) < 2e-3 * (1.0 + norm(z1)));
  cfg.init_mode = SamplerConfig::InitMode::PureNoise;
  SeededRng e(9);
  CHECK(max_abs_diff(init_state(cfg, dec, op, y, e), z1) == 0.0);
}

TEST_CASE("measurement lifting") {
  RealField mask(Shape{2, 2}, 1.0);
  mask[1] = 0.0;
  const auto m = LinearOperator::mask(mask);
  const RealField lifted = lift_measurement(m, RealField::vector({5.0, 6.0, 7.0}));
  CHECK(lifted.data() == std::vector<double>{5.0, 0.0, 6.0, 7.0});
  const auto down = LinearOperator::conv_downsample(Kernel::delta(), Shape{4, 4}, 2);
  const RealField up = lift_measurement(down, RealField(Shape{2, 2}, 1.0));
  CHECK(up.at(0, 0) == doctest::Approx(4.0));
  CHECK(up.at(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(lift_measurement(LinearOperator::circ_conv(Kernel::delta(), Shape{2, 2}), RealField(Shape{1, 4})), Error);
}

TEST_CASE("unguided sampling reproduces the prior") {
  const auto field = VectorFieldSpec::analytic_gaussian(1.0);
  const auto op = LinearOperator::dense(Eigen::MatrixXd::Identity(2, 2));
  const auto dec = DecoderSpec::identity();
  const RealField y = RealField::vector({3.0, -3.0});
  const SamplerConfig cfg = prior_config();
  const auto mc = oracle::mc_moments(
      [&](std::uint64_t seed) {
        SeededRng rng(seed);
        const auto r = integrate(cfg, field, dec, op, y, rng);
        return final_denoise(field, r.z_final, cfg.guidance.schedule.t_min());
      },
      10000, 1);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(mc.mean[i]) < 0.05);
    CHECK(std::abs(mc.cov(i, i) - 1.0) < 0.05);
  }
  CHECK(std::abs(mc.cov(0, 1)) < 0.05);
}

TEST_CASE("fixed-step convergence order") {
  const double heun = linear_field_error(SolverConfig::Kind::Heun, 20, 0.5) / linear_field_error(SolverConfig::Kind::Heun, 40, 0.5);
  const double euler =
      linear_field_error(SolverConfig::Kind::Euler, 20, 0.5) / linear_field_error(SolverConfig::Kind::Euler, 40, 0.5);
  CHECK(heun >= 3.3);
  CHECK(heun <= 4.7);
  CHECK(euler >= 1.7);
  CHECK(euler <= 2.3);
}

TEST_CASE("NFE accounting and trajectory ordering") {
  const auto field = VectorFieldSpec::analytic_gaussian(1.0);
  auto rhs = [&](const RealField& z, double t) { return eval_field(field, z, t); };
  SolverConfig cfg;
  cfg.kind = SolverConfig::Kind::Heun;
  cfg.steps = 17;
  const auto heun = integrate_ode(rhs, RealField::vector({1.0, 2.0}), 0.8, 0.001, cfg);
  CHECK(heun.trajectory.nfe == 34);
  cfg.kind = SolverConfig::Kind::Euler;
  CHECK(integrate_ode(rhs, RealField::vector({1.0, 2.0}), 0.8, 0.001, cfg).trajectory.nfe == 17);

  cfg.kind = SolverConfig::Kind::AdaptiveHeun;
  cfg.atol = cfg.rtol = 1e-8;
  const auto ad = integrate_ode(rhs, RealField::vector({1.0, 2.0}), 0.8, 0.001, cfg, true);
  const auto& tr = ad.trajectory;
  CHECK(tr.nfe == 1 + 2 * tr.accepted_steps + tr.rejected_steps - 1);
  CHECK(tr.nfe >= tr.accepted_steps);
  CHECK(tr.times.front() == 0.8);
  CHECK(tr.times.back() == 0.001);
  for (std::size_t i = 1; i < tr.times.size(); ++i) {
    CHECK(tr.times[i] < tr.times[i - 1]);
    CHECK(tr.nfe_cumulative[i] > tr.nfe_cumulative[i - 1]);
  }
  CHECK(tr.states.size() == tr.times.size());
}

TEST_CASE("solver failures carry the last state") {
  const auto field = VectorFieldSpec::analytic_gaussian(1.0);
  auto rhs = [&](const RealField& z, double t) { return eval_field(field, z, t); };
  SolverConfig cfg;
  cfg.atol = cfg.rtol = 1e-6;
  cfg.max_steps = 5;
  try {
    integrate_ode(rhs, RealField::vector({1.0}), 0.8, 0.001, cfg);
    FAIL("expected MaxStepsExceeded");
  } catch (const SamplerError& e) {
    CHECK(e.code() == ErrorCode::MaxStepsExceeded);
    CHECK(e.last_state().size() == 1);
    CHECK(e.last_t() < 0.8);
    CHECK(e.trajectory().accepted_steps > 0);
  }
  cfg.atol = cfg.rtol = 1e-12;
  cfg.max_steps = 200000;
  cfg.h_min = 1e-3;
  try {
    integrate_ode(rhs, RealField::vector({1.0}), 0.8, 0.001, cfg);
    FAIL("expected StepUnderflow");
  } catch (const SamplerError& e) {
    CHECK(e.code() == ErrorCode::StepUnderflow);
    CHECK(e.last_state().all_finite());
  }
  cfg.h_min = 1e-12;
  cfg.atol = cfg.rtol = 1e-5;
  auto nan_rhs = [](const RealField& z, double t) {
    RealField v = z;
    if (t < 0.5) v[0] = std::nan("");
    return v;
  };
  try {
    integrate_ode(nan_rhs, RealField::vector({1.0}), 0.8, 0.001, cfg);
    FAIL("expected a failure");
  } catch (const SamplerError& e) {
    CHECK(e.last_state().all_finite());
  }
  SolverConfig fixed;
  fixed.kind = SolverConfig::Kind::Euler;
  try {
    integrate_ode(nan_rhs, RealField::vector({1.0}), 0.8, 0.001, fixed);
    FAIL("expected NonFinite");
  } catch (const SamplerError& e) {
    CHECK(e.code() == ErrorCode::NonFinite);
    CHECK(e.last_state().all_finite());
  }
}

TEST_CASE("determinism") {
  const auto field = VectorFieldSpec::analytic_gaussian(0.3);
  const auto op = LinearOperator::circ_conv(build_gaussian_kernel(3, 1.0), Shape{8, 8});
  const auto dec = DecoderSpec::identity();
  SeededRng yr(1);
  const RealField y = gaussian_vector(yr, Shape{8, 8});
  SamplerConfig cfg;
  SeededRng a(5), b(5);
  const auto ra = integrate(cfg, field, dec, op, y, a);
  const auto rb = integrate(cfg, field, dec, op, y, b);
  CHECK(ra.z_final.data() == rb.z_final.data());
  CHECK(ra.trajectory.nfe == rb.trajectory.nfe);
}

TEST_CASE("final denoise") {
  const auto field = VectorFieldSpec::analytic_gaussian(1.0);
  const double t = 1e-3;
  const RealField out = final_denoise(field, RealField::vector({1.0, 0.0}), t);
  CHECK(std::abs(out[0] - (1 - t) / ((1 - t) * (1 - t) + t * t)) < 1e-15);
  CHECK(out[1] == 0.0);

  SeededRng rng(3);
  oracle::LinearGaussianModel model;
  model.A = Eigen::MatrixXd(3, 4);
  for (Eigen::Index i = 0; i < model.A.size(); ++i) model.A.data()[i] = rng.normal();
  const auto op = LinearOperator::dense(model.A);
  SamplerConfig cfg = prior_config();
  cfg.guidance.sigma_y = 0.1;
  const RealField y = gaussian_vector(rng, 3);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SeededRng r(seed);
    const auto res = integrate(cfg, field, model.decoder, op, y, r);
    const double rt = std::sqrt(posterior_cov_scalar(CovarianceMode::lflow(), t));
    CHECK(norm(final_denoise(field, res.z_final, t) - res.z_final) < 10.0 * rt);
  }
}

TEST_CASE("inpaint splice") {
  const RealField y = RealField::vector({1, 2, 3, 4});
  const RealField d = RealField::vector({9, 8, 7, 6});
  CHECK(inpaint_splice(RealField(Shape{1, 4}, 1.0), y, d).data() == y.data());
  CHECK(inpaint_splice(RealField(Shape{1, 4}, 0.0), y, d).data() == d.data());

  const RealField mask = build_box_mask(Shape{4, 4}, Box{1, 1, 2, 2});
  RealField yy(Shape{4, 4}), dd(Shape{4, 4});
  for (std::size_t i = 0; i < 16; ++i) {
    yy[i] = static_cast<double>(i) * mask[i];
    dd[i] = 100.0 + static_cast<double>(i);
  }
  const RealField out = inpaint_splice(mask, yy, dd);
  for (std::size_t i = 0; i < 16; ++i) CHECK(out[i] == (mask[i] == 1.0 ? yy[i] : dd[i]));
}

TEST_CASE("trajectory CSV") {
  Trajectory tr;
  tr.times = {0.8, 0.4};
  tr.nfe_cumulative = {1, 3};
  tr.state_norms = {2.0, 1.5};
  tr.residual_norms = {0.0, 0.25};
  std::ostringstream os;
  write_trajectory_csv(os, tr);
  CHECK(os.str() == "t,nfe_cumulative,state_norm,residual_norm\n0.8,1,2,0\n0.4,3,1.5,0.25\n");
}

TEST_CASE("NFE never decreases when tolerances tighten") {
  for (TaskKind kind : {TaskKind::GaussianDeblur, TaskKind::MotionDeblur, TaskKind::SuperResolution, TaskKind::BoxInpaint}) {
    TaskConfig loose = TaskConfig::defaults(kind);
    loose.synthetic_size = 32;
    loose.box_height = loose.box_width = 16;
    TaskConfig tight = loose;
    tight.sampler.solver.atol /= 100.0;
    tight.sampler.solver.rtol /= 100.0;
    const RealField x = load_task_image(loose);
    const RealField y = degrade(loose, x);
    const auto a = reconstruct(loose, y, x.shape(), &x).report;
    const auto b = reconstruct(tight, y, x.shape(), &x).report;
    CHECK(a.status == "ok");
    CHECK(b.status == "ok");
    CHECK(b.nfe >= a.nfe);
  }
}
