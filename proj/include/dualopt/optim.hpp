#pragma once

#include <array>
#include <cstdint>

#include "dualopt/buffer.hpp"

namespace dualopt {

// One EMA accumulator plus its update counter. Holds base states, delta
// states, and plain Adam moments alike; `steps` counts updates applied.
struct MomentState {
  Buffer value;
  double beta = 0.9;
  std::int64_t steps = 0;
};

struct AdamWParams {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Aggressive quintic from the Muon reference implementation. Inflates small
// singular values fast but orbits in a band around 1 instead of converging.
inline constexpr std::array<double, 3> kMuonQuinticCoeffs{3.4445, -4.7750, 2.0315};

// Classical degree-5 polar iteration (f(1)=1, f'(1)=0); converges to the
// orthogonal polar factor for inputs with singular values in (0, 1].
inline constexpr std::array<double, 3> kPolarQuinticCoeffs{15.0 / 8.0, -10.0 / 8.0, 3.0 / 8.0};

struct MuonParams {
  double lr = 1e-2;
  double momentum = 0.95;
  std::int64_t ns_iterations = 5;
  std::array<double, 3> ns_coefficients = kMuonQuinticCoeffs;
};

// value <- beta*value + (1-beta)*g; steps += 1.
void ema_update(MomentState& state, const Buffer& g);

// value / (1 - beta^counter). The counter is supplied by the caller: the
// global step for base states, the per-objective step for delta states.
Buffer bias_correct(const MomentState& state, std::int64_t counter);

// Decoupled AdamW: theta *= (1 - lr*wd); EMA-update m with g and v with g^2;
// theta -= lr * m_hat / (sqrt(v_hat) + eps), bias-corrected by t.
void adamw_step(Buffer& theta, const Buffer& g, MomentState& m, MomentState& v,
                const AdamWParams& p, std::int64_t t);

// X <- M/|M|_F, then `iterations` rounds of X <- aX + bX(X^T X) + cX(X^T X)^2.
// Approximates the orthogonal polar factor of M; quality depends on the
// coefficients (see the two presets above). |M|_F < 1e-12 returns the zero
// matrix of the same shape.
Buffer newton_schulz5(const Buffer& M, std::int64_t iterations,
                      const std::array<double, 3>& coeffs);

inline Buffer newton_schulz5(const Buffer& M) { return newton_schulz5(M, 5, kMuonQuinticCoeffs); }

// momentum <- beta*momentum + g (raw accumulation, no (1-beta) factor);
// theta -= lr * newton_schulz5(momentum). 2-D parameters only.
void muon_step(Buffer& theta, const Buffer& g, MomentState& momentum, const MuonParams& p);

}  // namespace dualopt
