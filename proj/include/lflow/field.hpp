#pragma once

// Numeric substrate: real grids, complex spectra, 2-D DFT, seeded Gaussian draws.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lflow/error.hpp"

namespace lflow {

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return height * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Row-major grid of doubles. Vectors are 1 x n grids.
class RealField {
 public:
  RealField() = default;
  explicit RealField(Shape shape, double fill = 0.0);
  RealField(Shape shape, std::vector<double> data);

  static RealField vector(std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_.width + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_.width + c]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const;

  RealField& operator+=(const RealField& other);
  RealField& operator-=(const RealField& other);
  RealField& operator*=(double s);

  /// this += a * x
  RealField& axpy(double a, const RealField& x);

 private:
  Shape shape_;
  std::vector<double> data_;
};

RealField operator+(RealField a, const RealField& b);
RealField operator-(RealField a, const RealField& b);
RealField operator*(double s, RealField a);

double dot(const RealField& a, const RealField& b);
double norm(const RealField& a);
double max_abs_diff(const RealField& a, const RealField& b);
RealField hadamard(const RealField& a, const RealField& b);
void require_same_shape(const RealField& a, const RealField& b, const char* where);

class ComplexSpectrum {
 public:
  using value_type = std::complex<double>;

  ComplexSpectrum() = default;
  explicit ComplexSpectrum(Shape shape, value_type fill = {});

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  value_type& operator[](std::size_t i) { return data_[i]; }
  const value_type& operator[](std::size_t i) const { return data_[i]; }
  value_type& at(std::size_t r, std::size_t c) { return data_[r * shape_.width + c]; }
  const value_type& at(std::size_t r, std::size_t c) const { return data_[r * shape_.width + c]; }
  std::span<value_type> values() { return data_; }
  std::span<const value_type> values() const { return data_; }

 private:
  Shape shape_;
  std::vector<value_type> data_;
};

/// Unnormalized forward transform: X[k] = sum_n x[n] exp(-2 pi i k.n / N).
ComplexSpectrum dft2_forward(const RealField& field);
ComplexSpectrum dft2_forward(const ComplexSpectrum& spectrum);

/// Inverse with 1/N scaling. Imaginary residue above `imag_tol` (relative to
/// the largest real magnitude, floored at 1) raises ImaginaryResidue.
RealField dft2_inverse(const ComplexSpectrum& spectrum, double imag_tol = 1e-9);
ComplexSpectrum dft2_inverse_complex(const ComplexSpectrum& spectrum);

/// mt19937_64 with a hand-rolled polar normal sampler, so a seed reproduces
/// the same stream on every conforming standard library.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double normal();

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

RealField gaussian_vector(SeededRng& rng, Shape shape, double mean = 0.0, double std = 1.0);
RealField gaussian_vector(SeededRng& rng, std::size_t dim, double mean = 0.0, double std = 1.0);

}  // namespace lflow
