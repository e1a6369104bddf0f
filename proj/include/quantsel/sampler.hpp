#ifndef QUANTSEL_SAMPLER_HPP
#define QUANTSEL_SAMPLER_HPP

#include <cstdint>

#include "quantsel/dataset.hpp"
#include "quantsel/lls.hpp"

namespace quantsel {

struct SamplerConfig {
  double target_acceptance = 0.3;  // per-block adaptation target
  int thin = 1;                    // keep every thin-th post-burn-in state
  int adapt_start = 100;   // iterations before covariance adaptation begins
  int cov_refresh = 25;    // proposal Cholesky refresh cadence during burn-in
};

// Adaptive block random-walk Metropolis over (xi), (gamma, log sigma) and
// (log lambda). Proposal covariances follow the running empirical covariance
// of each block, globally rescaled toward the target acceptance rate during
// burn-in and frozen afterwards. log sigma and log lambda carry their
// Jacobian terms so positivity needs no boundary handling.
//
// Deterministic: a fixed seed reproduces the draw sequence bit for bit.
// Throws NumericalError when a non-finite log posterior is encountered at
// initialization or after adaptation has frozen.
PosteriorDraws sample_posterior(const Dataset& d, Eigen::Index n_save,
                                Eigen::Index n_burn, std::uint64_t seed,
                                const SamplerConfig& config = {});

}  // namespace quantsel

#endif  // QUANTSEL_SAMPLER_HPP
