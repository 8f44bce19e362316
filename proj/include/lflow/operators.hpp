#pragma once

// Linear measurement operators y = A x with exact adjoints.
//
// All convolutions are circular (periodic boundary) and anchor the kernel at
// its centre tap, so CircConv is diagonalised by the DFT:
//   A = F^-1 diag(k_hat) F.

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lflow/field.hpp"

namespace lflow {

class Kernel {
 public:
  Kernel() = default;
  /// Rejects even side lengths and non-finite taps.
  explicit Kernel(RealField taps);

  static Kernel delta();

  const RealField& taps() const { return taps_; }
  std::size_t height() const { return taps_.height(); }
  std::size_t width() const { return taps_.width(); }
  double sum() const;
  bool is_normalized(double tol = 1e-12) const;

  /// Spatially reversed copy (the adjoint kernel).
  Kernel reversed() const;

  /// Transfer function on an h x w periodic grid, centre tap at the origin.
  ComplexSpectrum spectrum(Shape grid) const;

 private:
  RealField taps_{Shape{1, 1}, 1.0};
};

class LinearOperator {
 public:
  enum class Kind { Mask, CircConv, ConvDownsample, Dense };

  /// Observes entries where mask == 1; compact output of shape 1 x count.
  static LinearOperator mask(RealField mask);
  static LinearOperator circ_conv(Kernel kernel, Shape grid);
  /// Circular convolution followed by keeping every s-th row and column. A
  /// grid side of length 1 is left alone, so 1 x n signals subsample along n.
  static LinearOperator conv_downsample(Kernel kernel, Shape grid, std::size_t factor);
  /// Input is a 1 x cols vector, output 1 x rows.
  static LinearOperator dense(Eigen::MatrixXd matrix);

  Kind kind() const { return kind_; }
  Shape input_shape() const { return input_shape_; }
  Shape output_shape() const { return output_shape_; }

  const RealField& mask_field() const { return mask_; }
  const std::vector<std::size_t>& support() const { return support_; }
  const Kernel& kernel() const { return kernel_; }
  const ComplexSpectrum& kernel_spectrum() const { return kernel_hat_; }
  std::size_t factor() const { return factor_; }
  std::size_t row_factor() const { return row_factor_; }
  std::size_t col_factor() const { return col_factor_; }
  const Eigen::MatrixXd& matrix() const { return matrix_; }

  RealField apply(const RealField& x) const;
  RealField adjoint(const RealField& y) const;

 private:
  LinearOperator() = default;

  Kind kind_ = Kind::Dense;
  Shape input_shape_;
  Shape output_shape_;
  RealField mask_;
  std::vector<std::size_t> support_;
  Kernel kernel_;
  ComplexSpectrum kernel_hat_;
  std::size_t factor_ = 1;
  std::size_t row_factor_ = 1;
  std::size_t col_factor_ = 1;
  Eigen::MatrixXd matrix_;
};

std::string to_string(LinearOperator::Kind kind);

inline RealField apply(const LinearOperator& op, const RealField& x) { return op.apply(x); }
inline RealField adjoint(const LinearOperator& op, const RealField& y) { return op.adjoint(y); }

/// Explicit m x n matrix, built column by column from apply().
/// Throws DimensionGuard when the input dimension exceeds `max_input_dim`.
Eigen::MatrixXd dense_materialize(const LinearOperator& op, std::size_t max_input_dim = 4096);

/// Max discrepancy between D_s F_n^-1 X and F_{n/s}^-1 (block-average_s X) on a
/// random complex spectrum X of length n, both sides evaluated with dense DFT
/// matrices.
double block_downsample_check(std::size_t n, std::size_t s, std::uint64_t seed = 0);

Kernel build_gaussian_kernel(std::size_t size, double std);

/// Line of `length` taps through the centre along `angle` (radians, 0 = horizontal).
Kernel build_motion_kernel(std::size_t size, double angle, std::size_t length);

/// Keys cubic (a = -0.5) stretched by `factor`: a centred stand-in for the
/// antialiasing filter of bicubic downscaling.
Kernel build_bicubic_kernel(std::size_t factor);

struct Box {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

/// 0 inside the box, 1 elsewhere.
RealField build_box_mask(Shape shape, Box box);

/// Plain-text grid: "height width" on the first line, then one row per line.
void write_grid(const std::filesystem::path& path, const RealField& grid);
RealField read_grid(const std::filesystem::path& path);
std::string format_grid(const RealField& grid);
RealField parse_grid(const std::string& text);

}  // namespace lflow
