#include "lflow/field.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>

namespace lflow {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::ImaginaryResidue: return "ImaginaryResidue";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionGuard: return "DimensionGuard";
    case ErrorCode::ZeroScale: return "ZeroScale";
    case ErrorCode::CgNoConvergence: return "CgNoConvergence";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::MaxStepsExceeded: return "MaxStepsExceeded";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::CallbackFailure: return "CallbackFailure";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

RealField::RealField(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

RealField::RealField(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size())
    throw Error(ErrorCode::ShapeMismatch, "data length " + std::to_string(data_.size()) +
                                              " != " + std::to_string(shape_.height) + "x" +
                                              std::to_string(shape_.width));
}

RealField RealField::vector(std::vector<double> data) {
  Shape s{1, data.size()};
  return RealField(s, std::move(data));
}

bool RealField::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

RealField& RealField::operator+=(const RealField& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

RealField& RealField::operator-=(const RealField& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

RealField& RealField::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

RealField& RealField::axpy(double a, const RealField& x) {
  require_same_shape(*this, x, "axpy");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * x.data_[i];
  return *this;
}

RealField operator+(RealField a, const RealField& b) { return a += b; }
RealField operator-(RealField a, const RealField& b) { return a -= b; }
RealField operator*(double s, RealField a) { return a *= s; }

void require_same_shape(const RealField& a, const RealField& b, const char* where) {
  if (a.shape() != b.shape())
    throw Error(ErrorCode::ShapeMismatch,
                std::string(where) + ": " + std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                    " vs " + std::to_string(b.height()) + "x" + std::to_string(b.width()));
}

double dot(const RealField& a, const RealField& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const RealField& a) { return std::sqrt(dot(a, a)); }

double max_abs_diff(const RealField& a, const RealField& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

RealField hadamard(const RealField& a, const RealField& b) {
  require_same_shape(a, b, "hadamard");
  RealField out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

ComplexSpectrum::ComplexSpectrum(Shape shape, value_type fill) : shape_(shape), data_(shape.size(), fill) {}

namespace {

// FFTW planning is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void transform(const Shape& shape, std::complex<double>* data, int sign) {
  if (shape.height == 0 || shape.width == 0)
    throw Error(ErrorCode::ShapeMismatch, "dft2: empty shape");
  auto* buf = reinterpret_cast<fftw_complex*>(data);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(shape.height), static_cast<int>(shape.width), buf, buf, sign,
                            FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace

ComplexSpectrum dft2_forward(const RealField& field) {
  if (!field.all_finite()) throw Error(ErrorCode::NonFinite, "dft2_forward: non-finite input");
  ComplexSpectrum out(field.shape());
  for (std::size_t i = 0; i < field.size(); ++i) out[i] = {field[i], 0.0};
  transform(out.shape(), out.values().data(), FFTW_FORWARD);
  return out;
}

ComplexSpectrum dft2_forward(const ComplexSpectrum& spectrum) {
  ComplexSpectrum out = spectrum;
  transform(out.shape(), out.values().data(), FFTW_FORWARD);
  return out;
}

ComplexSpectrum dft2_inverse_complex(const ComplexSpectrum& spectrum) {
  ComplexSpectrum out = spectrum;
  transform(out.shape(), out.values().data(), FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(out.size());
  for (auto& v : out.values()) v *= scale;
  return out;
}

RealField dft2_inverse(const ComplexSpectrum& spectrum, double imag_tol) {
  ComplexSpectrum tmp = dft2_inverse_complex(spectrum);
  RealField out(spectrum.shape());
  double max_real = 1.0;
  double max_imag = 0.0;
  for (std::size_t i = 0; i < tmp.size(); ++i) {
    out[i] = tmp[i].real();
    max_real = std::max(max_real, std::abs(tmp[i].real()));
    max_imag = std::max(max_imag, std::abs(tmp[i].imag()));
  }
  if (max_imag > imag_tol * max_real)
    throw Error(ErrorCode::ImaginaryResidue, "dft2_inverse: imaginary part " + std::to_string(max_imag));
  if (!out.all_finite()) throw Error(ErrorCode::NonFinite, "dft2_inverse: non-finite output");
  return out;
}

double SeededRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SeededRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  has_spare_ = true;
  return u * m;
}

RealField gaussian_vector(SeededRng& rng, Shape shape, double mean, double std) {
  if (!(std >= 0.0)) throw Error(ErrorCode::InvalidArgument, "gaussian_vector: std must be >= 0");
  RealField out(shape);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mean + std * rng.normal();
  return out;
}

RealField gaussian_vector(SeededRng& rng, std::size_t dim, double mean, double std) {
  return gaussian_vector(rng, Shape{1, dim}, mean, std);
}

}  // namespace lflow
