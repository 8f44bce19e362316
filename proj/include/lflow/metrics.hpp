#pragma once

#include "lflow/field.hpp"

namespace lflow {

double mse(const RealField& a, const RealField& b);

/// 10 log10(peak^2 / MSE); +infinity when the images are identical.
double psnr(const RealField& a, const RealField& b, double peak = 1.0);

/// Mean SSIM over all fully-contained 11x11 Gaussian windows (sigma 1.5),
/// C1 = (0.01 peak)^2, C2 = (0.03 peak)^2. Images smaller than the window use
/// a window shrunk to the largest odd size that fits.
double ssim(const RealField& a, const RealField& b, double peak = 1.0);

}  // namespace lflow
