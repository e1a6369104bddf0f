#include "quantsel/normal.hpp"

#include <cmath>
#include <stdexcept>

namespace quantsel {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;
}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

// Rational approximation (Acklam), max relative error ~1.15e-9, then one
// Halley refinement against the erfc-based CDF.
double inverse_normal_cdf(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::invalid_argument("inverse_normal_cdf: tau must lie in (0,1)");
  }
  // Reflect the upper half: 1 - tau is exact there, and the lower tail keeps
  // full relative accuracy through erfc.
  if (tau > 0.5) return -inverse_normal_cdf(1.0 - tau);
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;

  double x;
  if (tau < p_low) {
    const double q = std::sqrt(-2.0 * std::log(tau));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = tau - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }

  // Halley step; skipped far in the tails where the density underflows.
  const double pdf = normal_pdf(x);
  if (pdf > 1e-300) {
    const double err = normal_cdf(x) - tau;
    const double u = err / pdf;
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

}  // namespace quantsel
