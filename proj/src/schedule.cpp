#include "lflow/schedule.hpp"

#include <algorithm>
#include <string>

namespace lflow {

namespace {

void require_unit_interval(double t, const char* where) {
  if (!(t >= 0.0 && t <= 1.0))
    throw Error(ErrorCode::OutOfRange, std::string(where) + ": t=" + std::to_string(t) + " outside [0,1]");
}

}  // namespace

PathSchedule::PathSchedule(double t_min, double t_max) : t_min_(t_min), t_max_(t_max) {
  if (!(0.0 < t_min && t_min < t_max && t_max < 1.0))
    throw Error(ErrorCode::InvalidArgument, "PathSchedule requires 0 < t_min < t_max < 1");
}

double PathSchedule::alpha(double t) const {
  require_unit_interval(t, "alpha");
  return 1.0 - t;
}

double PathSchedule::sigma(double t) const {
  require_unit_interval(t, "sigma");
  return t;
}

double PathSchedule::alpha_dot(double t) const {
  require_unit_interval(t, "alpha_dot");
  return -1.0;
}

double PathSchedule::sigma_dot(double t) const {
  require_unit_interval(t, "sigma_dot");
  return 1.0;
}

double PathSchedule::clamp(double t, bool* clamped) const {
  const double c = std::clamp(t, t_min_, t_max_);
  if (clamped) *clamped = (c != t);
  return c;
}

double PathSchedule::guidance_coefficient(double t, bool* clamped) const {
  const double c = clamp(t, clamped);
  return c / (1.0 - c);
}

RealField PathSchedule::interpolate(const RealField& z0, const RealField& z1, double t) const {
  require_same_shape(z0, z1, "interpolate");
  require_unit_interval(t, "interpolate");
  RealField out(z0.shape());
  const double a = alpha(t);
  const double s = sigma(t);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * z0[i] + s * z1[i];
  return out;
}

}  // namespace lflow
