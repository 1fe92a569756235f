#include "dualopt/theory.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace dualopt {

void validate_dynamics(const GradientDynamics& d) {
  if (!(d.m >= -1.0 && d.m <= 1.0) || !(d.n >= -1.0 && d.n <= 1.0)) {
    throw std::invalid_argument("gradient dynamics: m and n must lie in [-1, 1]");
  }
  if (!(d.G >= 0.0) || !std::isfinite(d.G)) {
    throw std::invalid_argument("gradient dynamics: G must be finite and >= 0");
  }
  if (!(d.beta >= 0.0 && d.beta < 1.0)) {
    throw std::invalid_argument("gradient dynamics: beta must lie in [0, 1)");
  }
  if (d.F_f < 1 || d.F_r < 1) {
    throw std::invalid_argument("gradient dynamics: F_f and F_r must be positive");
  }
}

StateLimits closed_form_limits(const GradientDynamics& d) {
  validate_dynamics(d);
  const double b = d.beta;
  const double bf = std::pow(b, static_cast<double>(d.F_f));
  const double br = std::pow(b, static_cast<double>(d.F_r));
  const double bp = std::pow(b, static_cast<double>(d.F_f + d.F_r));

  StateLimits out;
  out.B_inf = (br * (1.0 - bf) * d.m + (1.0 - br) * d.n) / (1.0 - bp) * d.G;
  out.Delta_f_inf = static_cast<double>(d.F_f) * std::pow(b, static_cast<double>(d.F_f - 1)) *
                    (1.0 - b) * (1.0 - br) / ((1.0 - bf) * (1.0 - bp)) * (d.m - d.n) * d.G;
  out.Delta_r_inf = static_cast<double>(d.F_r) * std::pow(b, static_cast<double>(d.F_r - 1)) *
                    (1.0 - b) * (1.0 - bf) / ((1.0 - br) * (1.0 - bp)) * (d.n - d.m) * d.G;
  return out;
}

std::vector<StateSample> simulate_states(const GradientDynamics& d, std::int64_t periods,
                                         bool stochastic, std::uint64_t seed) {
  validate_dynamics(d);
  if (periods < 1) {
    throw std::invalid_argument("simulate_states: periods must be >= 1");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(-0.1 * d.G, 0.1 * d.G);

  const std::int64_t period = d.F_f + d.F_r;
  double B = 0.0;
  double Df = 0.0;
  double Dr = 0.0;
  double cached_b_hat = 0.0;  // corrected base from the end of the previous step
  std::int64_t t = 0;

  std::vector<StateSample> samples;
  samples.reserve(static_cast<std::size_t>(periods));

  for (std::int64_t p = 0; p < periods; ++p) {
    for (std::int64_t k = 0; k < period; ++k) {
      const bool forget = k < d.F_f;
      double g = (forget ? d.m : d.n) * d.G;
      if (stochastic) {
        g += noise(rng);
      }

      double& delta = forget ? Df : Dr;
      delta = d.beta * delta + (1.0 - d.beta) * (g - cached_b_hat);

      B = d.beta * B + (1.0 - d.beta) * g;
      t += 1;
      cached_b_hat = B / (1.0 - std::pow(d.beta, static_cast<double>(t)));
    }
    samples.push_back(StateSample{B, Df, Dr});
  }
  return samples;
}

BoundaryClass boundary_classifier(const GradientDynamics& d, double tol) {
  if (!(tol > 0.0)) {
    throw std::invalid_argument("boundary_classifier: tol must be positive");
  }
  const StateLimits lim = closed_form_limits(d);
  const double thresh = tol * d.G;
  if (std::fabs(lim.Delta_f_inf) < thresh && std::fabs(lim.Delta_r_inf) < thresh) {
    return BoundaryClass::AlternateLike;
  }
  if (std::fabs(lim.B_inf) < thresh) {
    return BoundaryClass::DualOptimLike;
  }
  return BoundaryClass::Intermediate;
}

std::vector<GradientDynamics> verification_grid() {
  const double betas[] = {0.5, 0.9, 0.99};
  const std::int64_t freqs[][2] = {{1, 1}, {1, 5}, {2, 3}};
  const double means[][2] = {{1.0, 0.0}, {0.3, -0.7}};

  std::vector<GradientDynamics> grid;
  grid.reserve(20);
  for (double b : betas) {
    for (const auto& fr : freqs) {
      for (const auto& mn : means) {
        GradientDynamics d;
        d.beta = b;
        d.F_f = fr[0];
        d.F_r = fr[1];
        d.m = mn[0];
        d.n = mn[1];
        grid.push_back(d);
      }
    }
  }

  // Matched means: both delta limits vanish and the base carries the full
  // mean gradient.
  GradientDynamics matched;
  matched.beta = 0.9;
  matched.F_f = 1;
  matched.F_r = 5;
  matched.m = 0.4;
  matched.n = 0.4;
  grid.push_back(matched);

  // Means tuned so the shared-base fixed point vanishes:
  // m = -((1 - b^Fr) / (b^Fr * (1 - b^Ff))) * n.
  GradientDynamics cancel;
  cancel.beta = 0.9;
  cancel.F_f = 1;
  cancel.F_r = 5;
  cancel.n = -0.1;
  const double bf = std::pow(cancel.beta, static_cast<double>(cancel.F_f));
  const double br = std::pow(cancel.beta, static_cast<double>(cancel.F_r));
  cancel.m = -((1.0 - br) / (br * (1.0 - bf))) * cancel.n;
  grid.push_back(cancel);

  return grid;
}

}  // namespace dualopt
