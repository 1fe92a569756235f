#include "dualopt/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dualopt {

namespace {

void require_finite(const Buffer& g, const char* where) {
  if (!g.all_finite()) {
    throw std::invalid_argument(std::string(where) + ": gradient contains non-finite values");
  }
}

void require_positive_lr(double lr, const char* where) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw std::invalid_argument(std::string(where) + ": learning rate must be finite and >= 0");
  }
}

}  // namespace

void ema_update(MomentState& state, const Buffer& g) {
  if (state.beta < 0.0 || state.beta >= 1.0) {
    throw std::invalid_argument("ema_update: beta must lie in [0, 1)");
  }
  require_same_shape(state.value, g, "ema_update");
  const double beta = state.beta;
  elementwise_inplace(state.value, g,
                      [beta](double s, double x) { return beta * s + (1.0 - beta) * x; });
  state.steps += 1;
}

Buffer bias_correct(const MomentState& state, std::int64_t counter) {
  if (counter <= 0) {
    throw std::invalid_argument("bias_correct: counter must be positive");
  }
  const double denom = 1.0 - std::pow(state.beta, static_cast<double>(counter));
  if (denom <= 0.0) {
    throw std::invalid_argument("bias_correct: degenerate correction denominator");
  }
  return scale(state.value, 1.0 / denom);
}

void adamw_step(Buffer& theta, const Buffer& g, MomentState& m, MomentState& v,
                const AdamWParams& p, std::int64_t t) {
  require_finite(g, "adamw_step");
  require_positive_lr(p.lr, "adamw_step");
  if (t <= 0) {
    throw std::invalid_argument("adamw_step: step counter must be positive");
  }
  require_same_shape(theta, g, "adamw_step");
  require_same_shape(theta, m.value, "adamw_step");
  require_same_shape(theta, v.value, "adamw_step");

  // Decoupled weight decay applied before the moment reads, in multiply form
  // so a zero gradient contracts the parameter norm by exactly (1 - lr*wd).
  if (p.weight_decay != 0.0) {
    elementwise_inplace(theta, [&](double x) { return x * (1.0 - p.lr * p.weight_decay); });
  }

  ema_update(m, g);
  ema_update(v, square(g));

  const Buffer m_hat = bias_correct(m, t);
  const Buffer v_hat = bias_correct(v, t);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    theta[i] -= p.lr * m_hat[i] / (std::sqrt(v_hat[i]) + p.eps);
  }
}

Buffer newton_schulz5(const Buffer& M, std::int64_t iterations,
                      const std::array<double, 3>& coeffs) {
  if (M.shape().size() != 2) {
    throw std::invalid_argument("newton_schulz5: input must be a matrix");
  }
  if (iterations < 0) {
    throw std::invalid_argument("newton_schulz5: iteration count must be >= 0");
  }
  const double fro = norm(M);
  if (fro < 1e-12) {
    return zeros_like(M);
  }

  // Iterate on the wide orientation so the Gram matrix X X^T is the smaller
  // of the two; transpose back at the end if we flipped.
  const bool tall = M.rows() > M.cols();
  Buffer X = tall ? transpose(M) : M;
  X = scale(X, 1.0 / fro);

  const double a = coeffs[0];
  const double b = coeffs[1];
  const double c = coeffs[2];
  for (std::int64_t it = 0; it < iterations; ++it) {
    const Buffer A = matmul(X, transpose(X));
    const Buffer B = add(scale(A, b), scale(matmul(A, A), c));
    X = add(scale(X, a), matmul(B, X));
  }
  return tall ? transpose(X) : X;
}

void muon_step(Buffer& theta, const Buffer& g, MomentState& momentum, const MuonParams& p) {
  require_finite(g, "muon_step");
  require_positive_lr(p.lr, "muon_step");
  if (theta.shape().size() != 2) {
    throw std::invalid_argument("muon_step: parameters must be a matrix");
  }
  require_same_shape(theta, g, "muon_step");
  require_same_shape(theta, momentum.value, "muon_step");

  const double beta = momentum.beta;
  elementwise_inplace(momentum.value, g, [beta](double s, double x) { return beta * s + x; });
  momentum.steps += 1;

  const Buffer o = newton_schulz5(momentum.value, p.ns_iterations, p.ns_coefficients);
  axpy(theta, -p.lr, o);
}

}  // namespace dualopt
