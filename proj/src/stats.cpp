#include "hpin/stats.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <stdexcept>

#include "hpin/model.hpp"

namespace hpin {

MeanError mean_and_stderr(std::span<const double> xs) {
  if (xs.size() < 2) throw DomainError("standard error needs at least two samples");
  double s = 0.0;
  for (double x : xs) s += x;
  const double n = static_cast<double>(xs.size());
  const double mean = s / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

double z_for_confidence(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("confidence must be in (0,1)");
  boost::math::normal_distribution<double> normal;
  return boost::math::quantile(normal, 0.5 + 0.5 * confidence);
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y,
                        std::span<const double> sigma) {
  const std::size_t n = x.size();
  if (n != y.size() || (!sigma.empty() && sigma.size() != n)) {
    throw DomainError("least_squares: mismatched input lengths");
  }
  if (n < 2) throw DomainError("least_squares: need at least two points");
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = sigma.empty() ? 1.0 : 1.0 / (sigma[i] * sigma[i]);
    sw += w;
    sx += w * x[i];
    sy += w * y[i];
    sxx += w * x[i] * x[i];
    sxy += w * x[i] * y[i];
  }
  const double det = sw * sxx - sx * sx;
  if (!(det > 0.0)) throw DomainError("least_squares: x values are degenerate");
  LinearFit fit;
  fit.slope = (sw * sxy - sx * sy) / det;
  fit.intercept = (sxx * sy - sx * sxy) / det;
  double chi2 = 0.0;
  fit.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    fit.residuals[i] = y[i] - (fit.intercept + fit.slope * x[i]);
    const double w = sigma.empty() ? 1.0 : 1.0 / (sigma[i] * sigma[i]);
    chi2 += w * fit.residuals[i] * fit.residuals[i];
  }
  double scale = 1.0;
  if (sigma.empty()) scale = n > 2 ? chi2 / static_cast<double>(n - 2) : 0.0;
  fit.slope_stderr = std::sqrt(scale * sw / det);
  fit.intercept_stderr = std::sqrt(scale * sxx / det);
  return fit;
}

}  // namespace hpin
