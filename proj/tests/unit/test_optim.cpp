#include "doctest.h"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dualopt/optim.hpp"

namespace {

using dualopt::AdamWParams;
using dualopt::bias_correct;
using dualopt::Buffer;
using dualopt::MomentState;
using dualopt::MuonParams;

MomentState moment_like(const Buffer& like, double beta) {
  MomentState s;
  s.value = dualopt::zeros_like(like);
  s.beta = beta;
  return s;
}

double max_abs_diff(const Buffer& a, const Buffer& b) {
  REQUIRE(a.same_shape(b));
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
  return worst;
}

}  // namespace

TEST_CASE("ema_update blends new values with the configured decay") {
  Buffer g = Buffer::from_vector({1.0});
  MomentState s = moment_like(g, 0.9);

  dualopt::ema_update(s, g);
  CHECK(std::fabs(s.value[0] - 0.1) < 1e-15);
  CHECK(s.steps == 1);

  // beta = 0 forgets all history: the state becomes the new input bitwise.
  MomentState memoryless = moment_like(g, 0.0);
  memoryless.value[0] = 123.0;
  Buffer g2 = Buffer::from_vector({-4.5});
  dualopt::ema_update(memoryless, g2);
  CHECK(memoryless.value[0] == (1.0 - 0.0) * -4.5);
}

TEST_CASE("ema_update converges to a constant input stream") {
  Buffer g = Buffer::from_vector({1.0, -2.0, 0.5});
  MomentState s = moment_like(g, 0.9);
  for (int k = 0; k < 200; ++k) dualopt::ema_update(s, g);
  CHECK(s.steps == 200);
  // 0.9^200 ~ 7e-10, so the remaining gap is below 1e-8 per coordinate.
  CHECK(max_abs_diff(s.value, g) < 1e-8);
}

TEST_CASE("ema_update rejects invalid decay factors and shape mismatches") {
  Buffer g = Buffer::from_vector({1.0});
  MomentState bad_high = moment_like(g, 1.0);
  CHECK_THROWS_AS(dualopt::ema_update(bad_high, g), std::invalid_argument);
  MomentState bad_low = moment_like(g, -0.1);
  CHECK_THROWS_AS(dualopt::ema_update(bad_low, g), std::invalid_argument);

  MomentState s = moment_like(g, 0.9);
  Buffer wrong = Buffer::from_vector({1.0, 2.0});
  CHECK_THROWS_AS(dualopt::ema_update(s, wrong), std::invalid_argument);
}

TEST_CASE("bias_correct removes the cold-start shrinkage of a fresh EMA") {
  Buffer g = Buffer::from_vector({1.0});
  MomentState s = moment_like(g, 0.9);

  dualopt::ema_update(s, g);
  Buffer hat1 = bias_correct(s, 1);
  // (1-beta)*g / (1-beta^1) cancels exactly for a single update.
  CHECK(hat1[0] == 1.0);

  dualopt::ema_update(s, g);
  CHECK(std::fabs(s.value[0] - 0.19) < 1e-15);
  Buffer hat2 = bias_correct(s, 2);
  CHECK(std::fabs(hat2[0] - 1.0) < 1e-14);
}

TEST_CASE("bias-corrected EMA of a constant stream returns the constant") {
  Buffer g = Buffer::from_vector({-3.25, 0.75});
  MomentState s = moment_like(g, 0.9);
  for (int t = 1; t <= 50; ++t) {
    dualopt::ema_update(s, g);
    Buffer hat = bias_correct(s, t);
    CHECK(max_abs_diff(hat, g) < 1e-12);
  }
}

TEST_CASE("bias_correct is the identity when beta is zero and validates counters") {
  Buffer g = Buffer::from_vector({2.5});
  MomentState s = moment_like(g, 0.0);
  dualopt::ema_update(s, g);
  Buffer hat = bias_correct(s, 1);
  CHECK(hat[0] == s.value[0]);

  CHECK_THROWS_AS(bias_correct(s, 0), std::invalid_argument);
  CHECK_THROWS_AS(bias_correct(s, -3), std::invalid_argument);
}

TEST_CASE("adamw first step moves against the gradient at unit effective size") {
  AdamWParams p;
  p.lr = 1e-3;
  p.weight_decay = 0.0;
  Buffer theta = Buffer::zeros({3});
  Buffer g = Buffer::from_vector({2.0, -0.5, 0.0});
  MomentState m = moment_like(theta, p.beta1);
  MomentState v = moment_like(theta, p.beta2);

  dualopt::adamw_step(theta, g, m, v, p, 1);

  // After one step both moment corrections cancel, so the update reduces to
  // -lr * g / (|g| + eps) per coordinate.
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double expected = -p.lr * g[i] / (std::sqrt(g[i] * g[i]) + p.eps);
    CHECK(std::fabs(theta[i] - expected) < 1e-15);
  }
  CHECK(m.steps == 1);
  CHECK(v.steps == 1);
}

TEST_CASE("adamw with zero gradients contracts parameters by exactly (1 - lr*wd)") {
  AdamWParams p;
  p.lr = 1e-2;
  p.weight_decay = 0.1;
  Buffer theta = Buffer::from_vector({1.0, -2.0, 0.3});
  Buffer g = Buffer::zeros({3});
  MomentState m = moment_like(theta, p.beta1);
  MomentState v = moment_like(theta, p.beta2);

  Buffer expected = theta;
  for (int t = 1; t <= 25; ++t) {
    dualopt::adamw_step(theta, g, m, v, p, t);
    for (double& x : expected) x *= (1.0 - p.lr * p.weight_decay);
  }
  // Zero gradients leave the moments at zero, so decay is the whole update
  // and matches a bare repeated multiply bitwise.
  for (std::size_t i = 0; i < theta.size(); ++i) CHECK(theta[i] == expected[i]);
}

TEST_CASE("adamw per-step displacement approaches -lr * sign(g) for constant input") {
  AdamWParams p;
  p.lr = 1e-3;
  p.weight_decay = 0.0;
  Buffer theta = Buffer::zeros({1});
  Buffer g = Buffer::from_vector({1.0});
  MomentState m = moment_like(theta, p.beta1);
  MomentState v = moment_like(theta, p.beta2);

  double before_last = 0.0;
  for (int t = 1; t <= 500; ++t) {
    if (t == 500) before_last = theta[0];
    dualopt::adamw_step(theta, g, m, v, p, t);
  }
  const double last_delta = theta[0] - before_last;
  CHECK(std::fabs(last_delta - (-p.lr / (1.0 + p.eps))) < 1e-9);
}

TEST_CASE("adamw moments match standalone EMA accumulators bitwise") {
  AdamWParams p;
  Buffer theta = Buffer::zeros({2});
  MomentState m = moment_like(theta, p.beta1);
  MomentState v = moment_like(theta, p.beta2);
  MomentState m_ref = moment_like(theta, p.beta1);
  MomentState v_ref = moment_like(theta, p.beta2);

  for (int t = 1; t <= 10; ++t) {
    Buffer g = Buffer::from_vector({std::sin(0.7 * t), std::cos(1.3 * t)});
    dualopt::adamw_step(theta, g, m, v, p, t);
    dualopt::ema_update(m_ref, g);
    dualopt::ema_update(v_ref, dualopt::square(g));
  }
  for (std::size_t i = 0; i < theta.size(); ++i) {
    CHECK(m.value[i] == m_ref.value[i]);
    CHECK(v.value[i] == v_ref.value[i]);
  }
}

TEST_CASE("adamw validates step counter, gradient finiteness, and shapes") {
  AdamWParams p;
  Buffer theta = Buffer::zeros({2});
  Buffer g = Buffer::from_vector({1.0, 2.0});
  MomentState m = moment_like(theta, p.beta1);
  MomentState v = moment_like(theta, p.beta2);

  CHECK_THROWS_AS(dualopt::adamw_step(theta, g, m, v, p, 0), std::invalid_argument);
  CHECK_THROWS_AS(dualopt::adamw_step(theta, g, m, v, p, -1), std::invalid_argument);

  Buffer bad = Buffer::from_vector({1.0, std::nan("")});
  CHECK_THROWS_AS(dualopt::adamw_step(theta, bad, m, v, p, 1), std::invalid_argument);

  Buffer wrong = Buffer::from_vector({1.0});
  CHECK_THROWS_AS(dualopt::adamw_step(theta, wrong, m, v, p, 1), std::invalid_argument);

  AdamWParams bad_lr = p;
  bad_lr.lr = -1.0;
  CHECK_THROWS_AS(dualopt::adamw_step(theta, g, m, v, bad_lr, 1), std::invalid_argument);
}

TEST_CASE("newton_schulz5 maps near-zero matrices to zero and rejects bad inputs") {
  Buffer tiny = Buffer::full({2, 3}, 1e-15);
  Buffer out = dualopt::newton_schulz5(tiny);
  for (double x : out) CHECK(x == 0.0);
  CHECK(out.same_shape(tiny));

  Buffer vec = Buffer::from_vector({1.0, 2.0});
  CHECK_THROWS_AS(dualopt::newton_schulz5(vec), std::invalid_argument);
  Buffer mat = Buffer::full({2, 2}, 1.0);
  CHECK_THROWS_AS(dualopt::newton_schulz5(mat, -1, dualopt::kMuonQuinticCoeffs),
                  std::invalid_argument);
}

TEST_CASE("newton_schulz5 with zero iterations returns the normalized input") {
  Buffer M(std::vector<std::size_t>{2, 2}, {2.0, 0.0, 0.0, 2.0});
  Buffer out = dualopt::newton_schulz5(M, 0, dualopt::kMuonQuinticCoeffs);
  const Buffer expected = dualopt::scale(M, 1.0 / dualopt::norm(M));
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == expected[i]);
}

TEST_CASE("aggressive quintic lands near the identity but does not converge to it") {
  Buffer I(std::vector<std::size_t>{2, 2}, {1.0, 0.0, 0.0, 1.0});
  Buffer out = dualopt::newton_schulz5(I);
  // Diagonal orbit value for sigma = 1/sqrt(2) after five rounds, verified
  // against an independent scalar recurrence.
  CHECK(std::fabs(out.at(0, 0) - 1.1081111156829324) < 1e-12);
  CHECK(std::fabs(out.at(1, 1) - 1.1081111156829324) < 1e-12);
  // Diagonal inputs stay exactly diagonal through the polynomial iteration.
  CHECK(out.at(0, 1) == 0.0);
  CHECK(out.at(1, 0) == 0.0);
  CHECK(max_abs_diff(out, I) < 0.35);
}

TEST_CASE("aggressive quintic compresses a spread spectrum toward one") {
  Buffer M(std::vector<std::size_t>{2, 2}, {3.0, 0.0, 0.0, 1.0});
  Buffer out = dualopt::newton_schulz5(M);
  CHECK(std::fabs(out.at(0, 0) - 0.7530334535662782) < 1e-12);
  CHECK(std::fabs(out.at(1, 1) - 1.1337062282349253) < 1e-12);
  CHECK(out.at(0, 1) == 0.0);
  CHECK(out.at(1, 0) == 0.0);
}

TEST_CASE("polar quintic recovers orthogonal factors to high precision") {
  Buffer I(std::vector<std::size_t>{2, 2}, {1.0, 0.0, 0.0, 1.0});
  Buffer out = dualopt::newton_schulz5(I, 5, dualopt::kPolarQuinticCoeffs);
  CHECK(max_abs_diff(out, I) < 1e-12);

  // A scaled rotation: the orthogonal polar factor is the rotation itself.
  const double c = std::cos(0.3);
  const double s = std::sin(0.3);
  Buffer R(std::vector<std::size_t>{2, 2}, {c, -s, s, c});
  Buffer scaled = dualopt::scale(R, 0.7);
  Buffer polar = dualopt::newton_schulz5(scaled, 5, dualopt::kPolarQuinticCoeffs);
  CHECK(max_abs_diff(polar, R) < 1e-9);
}

TEST_CASE("newton_schulz5 commutes with transposition") {
  // Power-of-two entries keep the Frobenius norm reduction exact in both
  // element orders, so the tall and wide paths see identical arithmetic.
  Buffer M(std::vector<std::size_t>{3, 2}, {1.0, 0.5, 0.25, 2.0, 0.125, 4.0});
  Buffer tall = dualopt::newton_schulz5(M);
  Buffer wide = dualopt::newton_schulz5(dualopt::transpose(M));
  Buffer tall_t = dualopt::transpose(tall);
  REQUIRE(tall_t.same_shape(wide));
  for (std::size_t i = 0; i < wide.size(); ++i) CHECK(tall_t[i] == wide[i]);
}

TEST_CASE("muon momentum accumulates raw gradients without a (1-beta) factor") {
  MuonParams p;
  p.momentum = 0.9;
  Buffer theta = Buffer::zeros({2, 2});
  Buffer g = Buffer::full({2, 2}, 1.0);
  MomentState momentum = moment_like(theta, p.momentum);

  dualopt::muon_step(theta, g, momentum, p);
  for (double x : momentum.value) CHECK(x == 1.0);
  dualopt::muon_step(theta, g, momentum, p);
  for (double x : momentum.value) CHECK(x == 1.9);
  CHECK(momentum.steps == 2);
}

TEST_CASE("muon with zero gradient and zero momentum leaves parameters untouched") {
  MuonParams p;
  Buffer theta = Buffer::from_vector({0.5, -0.5, 2.0, 1.0}).reshaped({2, 2});
  Buffer before = theta;
  Buffer g = Buffer::zeros({2, 2});
  MomentState momentum = moment_like(theta, p.momentum);

  dualopt::muon_step(theta, g, momentum, p);
  for (std::size_t i = 0; i < theta.size(); ++i) CHECK(theta[i] == before[i]);
}

TEST_CASE("muon updates parameters along the orthogonalized momentum") {
  MuonParams p;
  p.lr = 0.1;
  Buffer theta = Buffer::zeros({2, 2});
  Buffer g(std::vector<std::size_t>{2, 2}, {1.0, 0.2, -0.3, 0.8});
  MomentState momentum = moment_like(theta, p.momentum);

  dualopt::muon_step(theta, g, momentum, p);
  const Buffer o = dualopt::newton_schulz5(g, p.ns_iterations, p.ns_coefficients);
  for (std::size_t i = 0; i < theta.size(); ++i) CHECK(theta[i] == -p.lr * o[i]);
  CHECK(theta.all_finite());
}

TEST_CASE("muon rejects non-matrix parameters and bad gradients") {
  MuonParams p;
  Buffer vec = Buffer::from_vector({1.0, 2.0});
  Buffer gvec = Buffer::from_vector({1.0, 2.0});
  MomentState momentum = moment_like(vec, p.momentum);
  CHECK_THROWS_AS(dualopt::muon_step(vec, gvec, momentum, p), std::invalid_argument);

  Buffer theta = Buffer::zeros({2, 2});
  Buffer bad = Buffer::full({2, 2}, std::numeric_limits<double>::infinity());
  MomentState m2 = moment_like(theta, p.momentum);
  CHECK_THROWS_AS(dualopt::muon_step(theta, bad, m2, p), std::invalid_argument);
}
