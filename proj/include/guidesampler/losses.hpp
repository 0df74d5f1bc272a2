#pragma once

#include "guidesampler/denoiser.hpp"
#include "guidesampler/tabular.hpp"

namespace guidesampler {

inline constexpr int kMaxFmLossLength = 12;
inline constexpr int kMaxAoarmLossLength = 8;

/// Exact masked flow-matching cross-entropy under the uniform schedule,
/// by enumeration of data sequences and mask patterns.
///
/// With t ~ U[0,1] and each position masked independently with probability
/// 1 - t, a pattern with m masked positions has probability
///   int_0^1 t^(D-m) (1-t)^m dt = m! (D-m)! / (D+1)!
/// and contributes the sum of its masked-position cross-entropies.
/// Equal to the generative MLM loss since the denoiser has no time input.
double fm_loss_exact(const Denoiser& denoiser, const TabularDistribution& p);

/// Same enumeration, each masked cross-entropy weighted by the unmasking
/// hazard kappa_dot / (1 - kappa) = 1 / (1 - t). Pattern weight becomes
///   int_0^1 t^(D-m) (1-t)^(m-1) dt = (m-1)! (D-m)! / D!   (m >= 1).
/// This is the continuous-time ELBO form; it equals aoarm_loss_exact exactly.
double fm_elbo_loss_exact(const Denoiser& denoiser, const TabularDistribution& p);

/// Exact any-order autoregressive negative log-likelihood, averaged over all
/// D! decoding orders and all data sequences.
double aoarm_loss_exact(const Denoiser& denoiser, const TabularDistribution& p);

}  // namespace guidesampler
