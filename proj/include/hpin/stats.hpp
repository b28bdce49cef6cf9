#pragma once

#include <span>
#include <vector>

namespace hpin {

struct MeanError {
  double mean = 0.0;
  double std_error = 0.0;  // standard error of the mean
};

/// Sample mean and standard error (n-1 normalization). Needs n >= 2.
MeanError mean_and_stderr(std::span<const double> xs);

/// Two-sided normal quantile: z with P(|Z| <= z) = confidence.
double z_for_confidence(double confidence);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double intercept_stderr = 0.0;
  std::vector<double> residuals;
};

/// Least-squares line y = a + b x. With `sigma` the fit is weighted by
/// 1/sigma^2 and parameter errors come from the weights; otherwise they come
/// from the residual scatter.
LinearFit least_squares(std::span<const double> x, std::span<const double> y,
                        std::span<const double> sigma = {});

}  // namespace hpin
