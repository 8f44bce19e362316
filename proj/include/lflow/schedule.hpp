#pragma once

#include "lflow/field.hpp"

namespace lflow {

enum class PathKind { ConditionalOT };

/// Conditional-OT probability path z_t = alpha(t) z0 + sigma(t) z1 with
/// alpha = 1 - t, sigma = t. Time is clamped to [t_min, t_max] wherever a
/// coefficient is singular at an endpoint.
class PathSchedule {
 public:
  explicit PathSchedule(double t_min = 1e-3, double t_max = 1.0 - 1e-3);

  PathKind kind() const { return PathKind::ConditionalOT; }
  double t_min() const { return t_min_; }
  double t_max() const { return t_max_; }

  double alpha(double t) const;
  double sigma(double t) const;
  double alpha_dot(double t) const;
  double sigma_dot(double t) const;

  /// Clamp into [t_min, t_max]; `clamped` is set when the input was moved.
  double clamp(double t, bool* clamped = nullptr) const;

  /// Guidance strength t / (1 - t) evaluated at the clamped time.
  double guidance_coefficient(double t, bool* clamped = nullptr) const;

  RealField interpolate(const RealField& z0, const RealField& z1, double t) const;

 private:
  double t_min_;
  double t_max_;
};

}  // namespace lflow
