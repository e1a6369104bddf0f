#ifndef QUANTSEL_NORMAL_HPP
#define QUANTSEL_NORMAL_HPP

namespace quantsel {

// Standard normal CDF, evaluated through erfc so both tails keep full
// relative accuracy.
double normal_cdf(double x);

// Standard normal density.
double normal_pdf(double x);

// Quantile function Phi^{-1}. Rational approximation refined by one Halley
// step on the CDF; |Phi(result) - tau| < 1e-12 over (0,1).
// Throws std::invalid_argument for tau outside (0,1).
double inverse_normal_cdf(double tau);

}  // namespace quantsel

#endif  // QUANTSEL_NORMAL_HPP
