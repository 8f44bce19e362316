#include "lflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace lflow {

double mse(const RealField& a, const RealField& b) {
  require_same_shape(a, b, "mse");
  if (a.size() == 0) throw Error(ErrorCode::InvalidArgument, "mse: empty images");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double psnr(const RealField& a, const RealField& b, double peak) {
  if (!(peak > 0.0)) throw Error(ErrorCode::InvalidArgument, "psnr: peak must be > 0");
  const double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / m);
}

double ssim(const RealField& a, const RealField& b, double peak) {
  require_same_shape(a, b, "ssim");
  if (!(peak > 0.0)) throw Error(ErrorCode::InvalidArgument, "ssim: peak must be > 0");
  const std::size_t h = a.height(), w = a.width();
  if (h == 0 || w == 0) throw Error(ErrorCode::InvalidArgument, "ssim: empty images");

  std::size_t win = std::min<std::size_t>({11, h, w});
  if (win % 2 == 0) --win;
  const double sigma = 1.5;
  const double c = static_cast<double>(win / 2);
  std::vector<double> g(win);
  double gsum = 0.0;
  for (std::size_t i = 0; i < win; ++i) {
    const double d = static_cast<double>(i) - c;
    g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    gsum += g[i];
  }
  for (double& v : g) v /= gsum;

  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r + win <= h; ++r)
    for (std::size_t q = 0; q + win <= w; ++q) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (std::size_t i = 0; i < win; ++i)
        for (std::size_t j = 0; j < win; ++j) {
          const double wt = g[i] * g[j];
          const double x = a.at(r + i, q + j), y = b.at(r + i, q + j);
          ma += wt * x;
          mb += wt * y;
          saa += wt * x * x;
          sbb += wt * y * y;
          sab += wt * x * y;
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / static_cast<double>(count);
}

}  // namespace lflow
