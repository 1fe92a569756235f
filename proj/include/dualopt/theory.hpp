#pragma once

#include <cstdint>
#include <vector>

namespace dualopt {

// Piecewise-constant alternating gradient stream: F_f steps with mean m*G,
// then F_r steps with mean n*G, repeating. G bounds the magnitudes.
struct GradientDynamics {
  double m = 1.0;
  double n = 0.0;
  double G = 1.0;
  double beta = 0.9;
  std::int64_t F_f = 1;
  std::int64_t F_r = 5;
};

// Fixed points the base and the two delta states converge to under the
// dynamics above (geometric convergence, sampled at period boundaries).
struct StateLimits {
  double B_inf = 0.0;
  double Delta_f_inf = 0.0;
  double Delta_r_inf = 0.0;
};

struct StateSample {
  double B = 0.0;
  double Delta_f = 0.0;
  double Delta_r = 0.0;
};

enum class BoundaryClass { AlternateLike, DualOptimLike, Intermediate };

void validate_dynamics(const GradientDynamics& d);

// Closed-form limits:
//   B_inf  = (b^Fr (1-b^Ff) m + (1-b^Fr) n) / (1 - b^(Ff+Fr)) * G
//   Df_inf = Ff b^(Ff-1) (1-b)(1-b^Fr) / ((1-b^Ff)(1-b^(Ff+Fr))) * (m-n) * G
//   Dr_inf = Fr b^(Fr-1) (1-b)(1-b^Ff) / ((1-b^Fr)(1-b^(Ff+Fr))) * (n-m) * G
StateLimits closed_form_limits(const GradientDynamics& d);

// Runs the scalar base/delta recursions literally (delta reads the stale
// corrected base from the end of the previous step; base bias correction
// uses the running global step) and samples raw (B, Delta_f, Delta_r) at
// every period boundary. stochastic=true adds i.i.d. uniform noise of
// amplitude 0.1*G to each gradient.
std::vector<StateSample> simulate_states(const GradientDynamics& d, std::int64_t periods,
                                         bool stochastic, std::uint64_t seed);

// AlternateLike when both delta limits vanish (|.| < tol*G): the shared
// base carries everything. DualOptimLike when the base limit vanishes:
// the deltas carry everything. Intermediate otherwise.
BoundaryClass boundary_classifier(const GradientDynamics& d, double tol);

// Stock 20-point verification lattice: three betas x three period shapes x
// two gradient-mean pairs, plus the two boundary regimes (matched means, and
// means tuned so the shared-base fixed point vanishes).
std::vector<GradientDynamics> verification_grid();

}  // namespace dualopt
