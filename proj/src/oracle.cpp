#include "lflow/oracle.hpp"

#include <atomic>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <thread>
#include <vector>

namespace lflow::oracle {

namespace {

Eigen::LLT<Eigen::MatrixXd> factor_spd(const Eigen::MatrixXd& m, const char* where) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, std::string(where) + ": matrix not SPD");
  return llt;
}

struct ExactCoefficients {
  double c;   // d E[z0|z_t] / d z_t
  double r2;  // Var[z0 | z_t]
};

ExactCoefficients exact_coefficients(double prior_std, double t) {
  const ConditionalMoments m = prior_conditional(prior_std, t);
  return {m.mean_scale, m.variance};
}

double covariance_for_mode(const CovarianceMode& mode, double prior_std, double t) {
  if (mode.kind == CovarianceMode::Kind::LFlowOracle) return prior_conditional(prior_std, t).variance;
  return posterior_cov_scalar(mode, t);
}

}  // namespace

Eigen::Index LinearGaussianModel::latent_dim() const {
  switch (decoder.kind()) {
    case DecoderSpec::Kind::Identity: return A.cols();
    case DecoderSpec::Kind::DiagonalScale: return static_cast<Eigen::Index>(decoder.scale().size());
    case DecoderSpec::Kind::LinearMatrix: return decoder.matrix().cols();
    case DecoderSpec::Kind::External: break;
  }
  throw Error(ErrorCode::InvalidArgument, "oracle models need a linear decoder");
}

Eigen::MatrixXd LinearGaussianModel::decoder_matrix() const {
  switch (decoder.kind()) {
    case DecoderSpec::Kind::Identity: return Eigen::MatrixXd::Identity(A.cols(), A.cols());
    case DecoderSpec::Kind::DiagonalScale: {
      const auto& s = decoder.scale();
      Eigen::VectorXd d(static_cast<Eigen::Index>(s.size()));
      for (std::size_t i = 0; i < s.size(); ++i) d(static_cast<Eigen::Index>(i)) = s[i];
      return d.asDiagonal();
    }
    case DecoderSpec::Kind::LinearMatrix: return decoder.matrix();
    case DecoderSpec::Kind::External: break;
  }
  throw Error(ErrorCode::InvalidArgument, "oracle models need a linear decoder");
}

Eigen::MatrixXd LinearGaussianModel::effective_operator() const { return A * decoder_matrix(); }

GaussianPosterior exact_posterior(const LinearGaussianModel& model, const Eigen::VectorXd& y) {
  if (model.sigma_y == 0.0) return exact_posterior_measurement_form(model, y);
  const Eigen::MatrixXd B = model.effective_operator();
  const double s2 = model.sigma_y * model.sigma_y;
  const double p2 = model.prior_std * model.prior_std;
  Eigen::MatrixXd precision = B.transpose() * B / s2;
  precision.diagonal().array() += 1.0 / p2;
  const auto llt = factor_spd(precision, "exact_posterior");
  GaussianPosterior post;
  post.cov = llt.solve(Eigen::MatrixXd::Identity(B.cols(), B.cols()));
  post.mean = llt.solve(B.transpose() * y / s2);
  return post;
}

GaussianPosterior exact_posterior_measurement_form(const LinearGaussianModel& model, const Eigen::VectorXd& y) {
  const Eigen::MatrixXd B = model.effective_operator();
  const double s2 = model.sigma_y * model.sigma_y;
  const double p2 = model.prior_std * model.prior_std;
  Eigen::MatrixXd gram = p2 * B * B.transpose();
  gram.diagonal().array() += s2;
  const auto llt = factor_spd(gram, "exact_posterior_measurement_form");
  GaussianPosterior post;
  post.mean = p2 * B.transpose() * llt.solve(y);
  post.cov = p2 * Eigen::MatrixXd::Identity(B.cols(), B.cols()) - p2 * p2 * B.transpose() * llt.solve(B);
  return post;
}

ConditionalMoments prior_conditional(double prior_std, double t) {
  const double p2 = prior_std * prior_std;
  const double cov_z0_zt = (1.0 - t) * p2;
  const double var_zt = (1.0 - t) * (1.0 - t) * p2 + t * t;
  return {cov_z0_zt / var_zt, p2 - cov_z0_zt * cov_z0_zt / var_zt};
}

Eigen::VectorXd dense_inner_vector(const Eigen::MatrixXd& A, const Eigen::VectorXd& residual, double sigma_y,
                                   double r2) {
  Eigen::MatrixXd S = r2 * A * A.transpose();
  S.diagonal().array() += sigma_y * sigma_y;
  return A.transpose() * factor_spd(S, "dense_inner_vector").solve(residual);
}

Eigen::VectorXd dense_guidance(const LinearGaussianModel& model, const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                               double t, const CovarianceMode& mode, Propagation propagation) {
  if (z.size() > 512 || y.size() > 512) throw Error(ErrorCode::DimensionGuard, "dense_guidance: dimension > 512");
  const Eigen::MatrixXd M = model.decoder_matrix();
  const Eigen::MatrixXd B = model.A * M;
  const ExactCoefficients k = exact_coefficients(model.prior_std, t);
  const double r2 = covariance_for_mode(mode, model.prior_std, t);
  const Eigen::MatrixXd spread = propagation == Propagation::DecoderJacobian ? Eigen::MatrixXd(B * B.transpose())
                                                                             : Eigen::MatrixXd(model.A * model.A.transpose());
  Eigen::MatrixXd S = r2 * spread;
  S.diagonal().array() += model.sigma_y * model.sigma_y;
  const Eigen::VectorXd residual = y - B * (k.c * z);
  return k.c * B.transpose() * factor_spd(S, "dense_guidance").solve(residual);
}

double marginal_log_likelihood(const LinearGaussianModel& model, const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                               double t) {
  const Eigen::MatrixXd B = model.effective_operator();
  const ExactCoefficients k = exact_coefficients(model.prior_std, t);
  Eigen::MatrixXd S = k.r2 * B * B.transpose();
  S.diagonal().array() += model.sigma_y * model.sigma_y;
  const auto llt = factor_spd(S, "marginal_log_likelihood");
  const Eigen::VectorXd r = y - B * (k.c * z);
  const Eigen::MatrixXd L = llt.matrixL();
  const double logdet = 2.0 * L.diagonal().array().log().sum();
  return -0.5 * r.dot(llt.solve(r)) - 0.5 * logdet -
         0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
}

Eigen::VectorXd conditional_velocity(const LinearGaussianModel& model, const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& z, double t) {
  const GaussianPosterior post = exact_posterior(model, y);
  Eigen::MatrixXd C = (1.0 - t) * (1.0 - t) * post.cov;
  C.diagonal().array() += t * t;
  const Eigen::VectorXd score = -factor_spd(C, "conditional_velocity").solve(z - (1.0 - t) * post.mean);
  return -(z + t * score) / (1.0 - t);
}

Eigen::MatrixXd finite_diff_jacobian(const FieldMap& f, const RealField& at, double step) {
  if (!(step > 0.0)) throw Error(ErrorCode::InvalidArgument, "finite_diff_jacobian: step must be > 0");
  const RealField f0 = f(at);
  Eigen::MatrixXd J(static_cast<Eigen::Index>(f0.size()), static_cast<Eigen::Index>(at.size()));
  RealField plus = at, minus = at;
  for (std::size_t j = 0; j < at.size(); ++j) {
    plus[j] = at[j] + step;
    minus[j] = at[j] - step;
    const RealField fp = f(plus), fm = f(minus);
    for (std::size_t i = 0; i < f0.size(); ++i)
      J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (fp[i] - fm[i]) / (2.0 * step);
    plus[j] = minus[j] = at[j];
  }
  return J;
}

std::size_t thread_budget() {
  if (const char* env = std::getenv("LFLOW_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return 1;
}

McMoments mc_moments(const std::function<RealField(std::uint64_t)>& runner, std::size_t n_seeds,
                     std::uint64_t first_seed, std::size_t threads) {
  if (n_seeds < 2) throw Error(ErrorCode::InvalidArgument, "mc_moments needs at least 2 seeds");
  if (threads == 0) threads = thread_budget();
  threads = std::min(threads, n_seeds);

  std::vector<RealField> samples(n_seeds);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i = next++; i < n_seeds && !failed; i = next++) {
      try {
        samples[i] = runner(first_seed + i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  const auto d = static_cast<Eigen::Index>(samples.front().size());
  McMoments m;
  m.samples = n_seeds;
  m.mean = Eigen::VectorXd::Zero(d);
  for (const auto& s : samples) m.mean += to_vector(s);
  m.mean /= static_cast<double>(n_seeds);
  m.cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& s : samples) {
    const Eigen::VectorXd c = to_vector(s) - m.mean;
    m.cov += c * c.transpose();
  }
  m.cov /= static_cast<double>(n_seeds - 1);
  m.std_errors = (m.cov.diagonal() / static_cast<double>(n_seeds)).array().sqrt();
  return m;
}

Eigen::VectorXd to_vector(const RealField& f) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) v(static_cast<Eigen::Index>(i)) = f[i];
  return v;
}

RealField to_field(const Eigen::VectorXd& v) { return RealField::vector(std::vector<double>(v.data(), v.data() + v.size())); }

}  // namespace lflow::oracle
