#include "lflow/operators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace lflow {

namespace {

std::size_t wrap(long long v, std::size_t n) {
  const long long m = static_cast<long long>(n);
  return static_cast<std::size_t>(((v % m) + m) % m);
}

void require_shape(const RealField& f, Shape expected, const char* where) {
  if (f.shape() != expected)
    throw Error(ErrorCode::ShapeMismatch,
                std::string(where) + ": got " + std::to_string(f.height()) + "x" + std::to_string(f.width()) +
                    ", expected " + std::to_string(expected.height) + "x" + std::to_string(expected.width));
}

RealField filter(const RealField& x, const ComplexSpectrum& transfer, bool conjugate) {
  ComplexSpectrum xs = dft2_forward(x);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] *= conjugate ? std::conj(transfer[i]) : transfer[i];
  return dft2_inverse(xs);
}

}  // namespace

Kernel::Kernel(RealField taps) : taps_(std::move(taps)) {
  if (taps_.height() % 2 == 0 || taps_.width() % 2 == 0)
    throw Error(ErrorCode::InvalidArgument, "kernel side lengths must be odd");
  if (!taps_.all_finite()) throw Error(ErrorCode::NonFinite, "kernel taps must be finite");
}

Kernel Kernel::delta() { return Kernel(RealField(Shape{1, 1}, 1.0)); }

double Kernel::sum() const {
  double s = 0.0;
  for (double v : taps_.values()) s += v;
  return s;
}

bool Kernel::is_normalized(double tol) const { return std::abs(sum() - 1.0) <= tol; }

Kernel Kernel::reversed() const {
  RealField r(taps_.shape());
  const std::size_t h = taps_.height(), w = taps_.width();
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) r.at(i, j) = taps_.at(h - 1 - i, w - 1 - j);
  return Kernel(std::move(r));
}

ComplexSpectrum Kernel::spectrum(Shape grid) const {
  RealField embedded(grid);
  const long long ci = static_cast<long long>(height() / 2);
  const long long cj = static_cast<long long>(width() / 2);
  for (std::size_t i = 0; i < height(); ++i)
    for (std::size_t j = 0; j < width(); ++j)
      embedded.at(wrap(static_cast<long long>(i) - ci, grid.height), wrap(static_cast<long long>(j) - cj, grid.width)) +=
          taps_.at(i, j);
  return dft2_forward(embedded);
}

LinearOperator LinearOperator::mask(RealField mask) {
  LinearOperator op;
  op.kind_ = Kind::Mask;
  op.input_shape_ = mask.shape();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] == 1.0)
      op.support_.push_back(i);
    else if (mask[i] != 0.0)
      throw Error(ErrorCode::InvalidArgument, "mask entries must be 0 or 1");
  }
  op.output_shape_ = Shape{1, op.support_.size()};
  op.mask_ = std::move(mask);
  return op;
}

LinearOperator LinearOperator::circ_conv(Kernel kernel, Shape grid) {
  if (grid.size() == 0) throw Error(ErrorCode::InvalidArgument, "circ_conv: empty grid");
  LinearOperator op;
  op.kind_ = Kind::CircConv;
  op.input_shape_ = grid;
  op.output_shape_ = grid;
  op.kernel_hat_ = kernel.spectrum(grid);
  op.kernel_ = std::move(kernel);
  return op;
}

LinearOperator LinearOperator::conv_downsample(Kernel kernel, Shape grid, std::size_t factor) {
  if (factor == 0 || grid.size() == 0) throw Error(ErrorCode::InvalidArgument, "conv_downsample: empty grid or factor");
  LinearOperator op;
  op.row_factor_ = grid.height == 1 ? 1 : factor;
  op.col_factor_ = grid.width == 1 ? 1 : factor;
  if (grid.height % op.row_factor_ != 0 || grid.width % op.col_factor_ != 0)
    throw Error(ErrorCode::InvalidArgument, "conv_downsample: factor must divide the grid sides");
  op.kind_ = Kind::ConvDownsample;
  op.input_shape_ = grid;
  op.output_shape_ = Shape{grid.height / op.row_factor_, grid.width / op.col_factor_};
  op.factor_ = factor;
  op.kernel_hat_ = kernel.spectrum(grid);
  op.kernel_ = std::move(kernel);
  return op;
}

LinearOperator LinearOperator::dense(Eigen::MatrixXd matrix) {
  if (!matrix.allFinite()) throw Error(ErrorCode::NonFinite, "dense operator has non-finite entries");
  LinearOperator op;
  op.kind_ = Kind::Dense;
  op.input_shape_ = Shape{1, static_cast<std::size_t>(matrix.cols())};
  op.output_shape_ = Shape{1, static_cast<std::size_t>(matrix.rows())};
  op.matrix_ = std::move(matrix);
  return op;
}

RealField LinearOperator::apply(const RealField& x) const {
  require_shape(x, input_shape_, "apply");
  switch (kind_) {
    case Kind::Mask: {
      RealField y(output_shape_);
      for (std::size_t k = 0; k < support_.size(); ++k) y[k] = x[support_[k]];
      return y;
    }
    case Kind::CircConv:
      return filter(x, kernel_hat_, false);
    case Kind::ConvDownsample: {
      const RealField full = filter(x, kernel_hat_, false);
      RealField y(output_shape_);
      for (std::size_t i = 0; i < output_shape_.height; ++i)
        for (std::size_t j = 0; j < output_shape_.width; ++j) y.at(i, j) = full.at(i * row_factor_, j * col_factor_);
      return y;
    }
    case Kind::Dense: {
      Eigen::Map<const Eigen::VectorXd> xv(x.values().data(), static_cast<Eigen::Index>(x.size()));
      Eigen::VectorXd yv = matrix_ * xv;
      return RealField(output_shape_, std::vector<double>(yv.data(), yv.data() + yv.size()));
    }
  }
  return {};
}

RealField LinearOperator::adjoint(const RealField& y) const {
  require_shape(y, output_shape_, "adjoint");
  switch (kind_) {
    case Kind::Mask: {
      RealField x(input_shape_);
      for (std::size_t k = 0; k < support_.size(); ++k) x[support_[k]] = y[k];
      return x;
    }
    case Kind::CircConv:
      return filter(y, kernel_hat_, true);
    case Kind::ConvDownsample: {
      RealField up(input_shape_);
      for (std::size_t i = 0; i < output_shape_.height; ++i)
        for (std::size_t j = 0; j < output_shape_.width; ++j) up.at(i * row_factor_, j * col_factor_) = y.at(i, j);
      return filter(up, kernel_hat_, true);
    }
    case Kind::Dense: {
      Eigen::Map<const Eigen::VectorXd> yv(y.values().data(), static_cast<Eigen::Index>(y.size()));
      Eigen::VectorXd xv = matrix_.transpose() * yv;
      return RealField(input_shape_, std::vector<double>(xv.data(), xv.data() + xv.size()));
    }
  }
  return {};
}

std::string to_string(LinearOperator::Kind kind) {
  switch (kind) {
    case LinearOperator::Kind::Mask: return "mask";
    case LinearOperator::Kind::CircConv: return "circ_conv";
    case LinearOperator::Kind::ConvDownsample: return "conv_downsample";
    case LinearOperator::Kind::Dense: return "dense";
  }
  return "?";
}

Eigen::MatrixXd dense_materialize(const LinearOperator& op, std::size_t max_input_dim) {
  const std::size_t n = op.input_shape().size();
  const std::size_t m = op.output_shape().size();
  if (n > max_input_dim)
    throw Error(ErrorCode::DimensionGuard, "dense_materialize: input dim " + std::to_string(n) + " > " +
                                               std::to_string(max_input_dim));
  if (op.kind() == LinearOperator::Kind::Dense) return op.matrix();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  RealField e(op.input_shape());
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    const RealField col = op.apply(e);
    for (std::size_t i = 0; i < m; ++i) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
    e[j] = 0.0;
  }
  return out;
}

double block_downsample_check(std::size_t n, std::size_t s, std::uint64_t seed) {
  if (s == 0 || n == 0 || n % s != 0) throw Error(ErrorCode::InvalidArgument, "block_downsample_check: s must divide n");
  using Cmat = Eigen::MatrixXcd;
  using Cvec = Eigen::VectorXcd;
  const auto N = static_cast<Eigen::Index>(n);
  const auto M = static_cast<Eigen::Index>(n / s);

  auto inverse_dft = [](Eigen::Index len) {
    Cmat f(len, len);
    for (Eigen::Index r = 0; r < len; ++r)
      for (Eigen::Index c = 0; c < len; ++c) {
        const double ang = 2.0 * std::numbers::pi * static_cast<double>((r * c) % len) / static_cast<double>(len);
        f(r, c) = std::polar(1.0 / static_cast<double>(len), ang);
      }
    return f;
  };

  Cmat subsample = Cmat::Zero(M, N);
  Cmat block_average = Cmat::Zero(M, N);
  for (Eigen::Index k = 0; k < M; ++k) {
    subsample(k, k * static_cast<Eigen::Index>(s)) = 1.0;
    for (std::size_t j = 0; j < s; ++j) block_average(k, k + static_cast<Eigen::Index>(j) * M) = 1.0 / static_cast<double>(s);
  }

  SeededRng rng(seed);
  Cvec x(N);
  for (Eigen::Index i = 0; i < N; ++i) x(i) = {rng.normal(), rng.normal()};

  const Cvec lhs = subsample * (inverse_dft(N) * x);
  const Cvec rhs = inverse_dft(M) * (block_average * x);
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

Kernel build_gaussian_kernel(std::size_t size, double std) {
  if (size % 2 == 0) throw Error(ErrorCode::InvalidArgument, "gaussian kernel size must be odd");
  if (!(std > 0.0)) throw Error(ErrorCode::InvalidArgument, "gaussian kernel std must be > 0");
  RealField taps(Shape{size, size});
  const double c = static_cast<double>(size / 2);
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) {
      const double di = static_cast<double>(i) - c, dj = static_cast<double>(j) - c;
      const double v = std::exp(-(di * di + dj * dj) / (2.0 * std * std));
      taps.at(i, j) = v;
      total += v;
    }
  taps *= 1.0 / total;
  return Kernel(std::move(taps));
}

Kernel build_motion_kernel(std::size_t size, double angle, std::size_t length) {
  if (size % 2 == 0) throw Error(ErrorCode::InvalidArgument, "motion kernel size must be odd");
  if (length == 0 || length > size) throw Error(ErrorCode::InvalidArgument, "motion kernel length must be in [1, size]");
  RealField taps(Shape{size, size});
  const double c = static_cast<double>(size / 2);
  const double dx = std::cos(angle), dy = -std::sin(angle);
  for (std::size_t k = 0; k < length; ++k) {
    const double d = static_cast<double>(k) - static_cast<double>(length - 1) / 2.0;
    const auto col = static_cast<long long>(std::lround(c + d * dx));
    const auto row = static_cast<long long>(std::lround(c + d * dy));
    const auto last = static_cast<long long>(size) - 1;
    taps.at(static_cast<std::size_t>(std::clamp(row, 0LL, last)), static_cast<std::size_t>(std::clamp(col, 0LL, last))) += 1.0;
  }
  taps *= 1.0 / static_cast<double>(length);
  return Kernel(std::move(taps));
}

Kernel build_bicubic_kernel(std::size_t factor) {
  if (factor == 0) throw Error(ErrorCode::InvalidArgument, "bicubic factor must be >= 1");
  if (factor == 1) return Kernel::delta();
  auto cubic = [](double x) {
    constexpr double a = -0.5;
    x = std::abs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
  };
  const std::size_t size = 4 * factor - 1;
  const double c = static_cast<double>(size / 2);
  std::vector<double> w(size);
  for (std::size_t i = 0; i < size; ++i) w[i] = cubic((static_cast<double>(i) - c) / static_cast<double>(factor));
  RealField taps(Shape{size, size});
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) {
      taps.at(i, j) = w[i] * w[j];
      total += taps.at(i, j);
    }
  taps *= 1.0 / total;
  return Kernel(std::move(taps));
}

RealField build_box_mask(Shape shape, Box box) {
  if (box.top + box.height > shape.height || box.left + box.width > shape.width)
    throw Error(ErrorCode::OutOfRange, "box exceeds mask shape");
  RealField mask(shape, 1.0);
  for (std::size_t i = box.top; i < box.top + box.height; ++i)
    for (std::size_t j = box.left; j < box.left + box.width; ++j) mask.at(i, j) = 0.0;
  return mask;
}

std::string format_grid(const RealField& grid) {
  std::ostringstream out;
  out << grid.height() << ' ' << grid.width() << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < grid.height(); ++i) {
    for (std::size_t j = 0; j < grid.width(); ++j) out << (j ? " " : "") << grid.at(i, j);
    out << '\n';
  }
  return out.str();
}

RealField parse_grid(const std::string& text) {
  std::istringstream in(text);
  long long h = -1, w = -1;
  if (!(in >> h >> w) || h <= 0 || w <= 0) throw Error(ErrorCode::Io, "grid: malformed header");
  Shape shape{static_cast<std::size_t>(h), static_cast<std::size_t>(w)};
  std::vector<double> data(shape.size());
  for (auto& v : data)
    if (!(in >> v)) throw Error(ErrorCode::Io, "grid: expected " + std::to_string(shape.size()) + " values");
  std::string extra;
  if (in >> extra) throw Error(ErrorCode::Io, "grid: trailing data");
  RealField out(shape, std::move(data));
  if (!out.all_finite()) throw Error(ErrorCode::NonFinite, "grid: non-finite value");
  return out;
}

void write_grid(const std::filesystem::path& path, const RealField& grid) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string());
  out << format_grid(grid);
}

RealField read_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_grid(buf.str());
}

}  // namespace lflow
