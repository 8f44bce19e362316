#include "lflow/decoder.hpp"

#include <cmath>

#include "lflow/operators.hpp"

namespace lflow {

namespace {

constexpr double kEncoderRidge = 1e-10;

RealField multiply(const Eigen::MatrixXd& m, const RealField& x, Shape out_shape) {
  Eigen::Map<const Eigen::VectorXd> xv(x.values().data(), static_cast<Eigen::Index>(x.size()));
  Eigen::VectorXd y = m * xv;
  return RealField(out_shape, std::vector<double>(y.data(), y.data() + y.size()));
}

void require_size(const RealField& f, Shape expected, const char* where) {
  if (f.shape() != expected)
    throw Error(ErrorCode::ShapeMismatch, std::string(where) + ": unexpected shape " + std::to_string(f.height()) +
                                              "x" + std::to_string(f.width()));
}

}  // namespace

DecoderSpec DecoderSpec::identity() { return DecoderSpec(); }

DecoderSpec DecoderSpec::diagonal_scale(RealField scale) {
  if (!scale.all_finite()) throw Error(ErrorCode::NonFinite, "diagonal scale must be finite");
  DecoderSpec d;
  d.kind_ = Kind::DiagonalScale;
  d.isometric_ = true;
  for (double s : scale.values())
    if (std::abs(std::abs(s) - 1.0) > 1e-12) d.isometric_ = false;
  d.data_shape_ = d.latent_shape_ = scale.shape();
  d.scale_ = std::move(scale);
  return d;
}

DecoderSpec DecoderSpec::linear_matrix(Eigen::MatrixXd matrix, Shape data_shape, Shape latent_shape) {
  if (!matrix.allFinite()) throw Error(ErrorCode::NonFinite, "decoder matrix must be finite");
  const auto rows = static_cast<std::size_t>(matrix.rows());
  const auto cols = static_cast<std::size_t>(matrix.cols());
  if (data_shape.size() == 0) data_shape = Shape{1, rows};
  if (latent_shape.size() == 0) latent_shape = Shape{1, cols};
  if (data_shape.size() != rows || latent_shape.size() != cols)
    throw Error(ErrorCode::ShapeMismatch, "decoder matrix does not match the given shapes");
  DecoderSpec d;
  d.kind_ = Kind::LinearMatrix;
  const Eigen::MatrixXd gram = matrix.transpose() * matrix;
  d.isometric_ = gram.isApprox(Eigen::MatrixXd::Identity(gram.rows(), gram.cols()), 1e-10);
  Eigen::MatrixXd normal = gram + kEncoderRidge * Eigen::MatrixXd::Identity(gram.rows(), gram.cols());
  d.normal_factor_ = std::make_shared<const Eigen::LDLT<Eigen::MatrixXd>>(normal);
  d.matrix_ = std::move(matrix);
  d.data_shape_ = data_shape;
  d.latent_shape_ = latent_shape;
  return d;
}

DecoderSpec DecoderSpec::linear_from_grid(const std::filesystem::path& path) {
  const RealField grid = read_grid(path);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(grid.height()), static_cast<Eigen::Index>(grid.width()));
  for (std::size_t i = 0; i < grid.height(); ++i)
    for (std::size_t j = 0; j < grid.width(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = grid.at(i, j);
  return linear_matrix(std::move(m));
}

DecoderSpec DecoderSpec::external(Callbacks callbacks, bool isometric) {
  if (!callbacks.decode || !callbacks.jvp || !callbacks.vjp || !callbacks.encode)
    throw Error(ErrorCode::InvalidArgument, "external decoder needs decode, encode, jvp and vjp");
  DecoderSpec d;
  d.kind_ = Kind::External;
  d.isometric_ = isometric;
  d.callbacks_ = std::make_shared<const Callbacks>(std::move(callbacks));
  return d;
}

RealField DecoderSpec::decode(const RealField& z) const {
  switch (kind_) {
    case Kind::Identity: return z;
    case Kind::DiagonalScale: return hadamard(scale_, z);
    case Kind::LinearMatrix:
      require_size(z, latent_shape_, "decode");
      return multiply(matrix_, z, data_shape_);
    case Kind::External: return callbacks_->decode(z);
  }
  return {};
}

RealField DecoderSpec::encode(const RealField& x) const {
  switch (kind_) {
    case Kind::Identity: return x;
    case Kind::DiagonalScale: {
      require_same_shape(scale_, x, "encode");
      RealField z(x.shape());
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::abs(scale_[i]) < 1e-12) throw Error(ErrorCode::ZeroScale, "encode: scale entry ~ 0 at " + std::to_string(i));
        z[i] = x[i] / scale_[i];
      }
      return z;
    }
    case Kind::LinearMatrix: {
      require_size(x, data_shape_, "encode");
      Eigen::Map<const Eigen::VectorXd> xv(x.values().data(), static_cast<Eigen::Index>(x.size()));
      Eigen::VectorXd z = normal_factor_->solve(matrix_.transpose() * xv);
      return RealField(latent_shape_, std::vector<double>(z.data(), z.data() + z.size()));
    }
    case Kind::External: return callbacks_->encode(x);
  }
  return {};
}

RealField DecoderSpec::jvp(const RealField& at, const RealField& u) const {
  switch (kind_) {
    case Kind::Identity:
      require_same_shape(at, u, "jvp");
      return u;
    case Kind::DiagonalScale: return hadamard(scale_, u);
    case Kind::LinearMatrix:
      require_size(u, latent_shape_, "jvp");
      return multiply(matrix_, u, data_shape_);
    case Kind::External: return callbacks_->jvp(at, u);
  }
  return {};
}

RealField DecoderSpec::vjp(const RealField& at, const RealField& w) const {
  switch (kind_) {
    case Kind::Identity:
      require_same_shape(at, w, "vjp");
      return w;
    case Kind::DiagonalScale: return hadamard(scale_, w);
    case Kind::LinearMatrix:
      require_size(w, data_shape_, "vjp");
      return multiply(matrix_.transpose(), w, latent_shape_);
    case Kind::External: return callbacks_->vjp(at, w);
  }
  return {};
}

}  // namespace lflow
