#include "doctest.h"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dualopt/dual_state.hpp"
#include "dualopt/schedule.hpp"

namespace {

using dualopt::BaseUpdateInput;
using dualopt::BaseUpdateTiming;
using dualopt::Buffer;
using dualopt::DualConfig;
using dualopt::DualState;
using dualopt::OptimMode;
using dualopt::StepTrace;

DualConfig adamw_config(double lr = 1e-2, double wd = 0.0) {
  DualConfig c;
  c.adamw.lr = lr;
  c.adamw.weight_decay = wd;
  return c;
}

bool buffers_identical(const Buffer& a, const Buffer& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("base_update first call cancels its own bias correction") {
  Buffer like = Buffer::zeros({1});
  DualState s = dualopt::make_dual_state(like, adamw_config());

  dualopt::base_update(s, Buffer::from_vector({1.0}));
  CHECK(std::fabs(s.base_m.value[0] - 0.1) < 1e-15);
  CHECK(s.cached_base_m_hat[0] == 1.0);
  CHECK(std::fabs(s.base_v.value[0] - 0.05) < 1e-15);
  CHECK(s.cached_base_v_hat[0] == 1.0);
}

TEST_CASE("base_update on an alternating unit stream settles at -1/19") {
  Buffer like = Buffer::zeros({1});
  DualState s = dualopt::make_dual_state(like, adamw_config());

  for (int k = 0; k < 600; ++k) {
    const double g = (k % 2 == 0) ? 1.0 : -1.0;
    dualopt::base_update(s, Buffer::from_vector({g}));
  }
  // Period-2 fixed point of the EMA seen after the -1 input:
  // (beta*(1-beta) - (1-beta)) / (1 - beta^2) = -1/19 for beta = 0.9.
  CHECK(std::fabs(s.base_m.value[0] - (-1.0 / 19.0)) < 1e-9);
  CHECK(std::fabs(s.cached_base_m_hat[0] - (-1.0 / 19.0)) < 1e-9);
}

TEST_CASE("base_update decays geometrically once gradients stop") {
  Buffer like = Buffer::zeros({1});
  DualState s = dualopt::make_dual_state(like, adamw_config());
  dualopt::base_update(s, Buffer::from_vector({1.0}));
  const double start = s.base_m.value[0];

  Buffer zero = Buffer::zeros({1});
  for (int k = 1; k <= 30; ++k) {
    dualopt::base_update(s, zero);
    CHECK(std::fabs(s.base_m.value[0] - start * std::pow(0.9, k)) < 1e-15);
  }
}

TEST_CASE("base_update in Muon mode accumulates raw momentum and caches a copy") {
  DualConfig c;
  c.mode = OptimMode::Muon;
  c.muon.momentum = 0.95;
  Buffer like = Buffer::zeros({2, 2});
  DualState s = dualopt::make_dual_state(like, c);
  CHECK(s.delta_v.empty());

  Buffer g = Buffer::full({2, 2}, 2.0);
  dualopt::base_update(s, g);
  CHECK(s.base_m.value[0] == 2.0);
  CHECK(s.cached_base_m_hat[0] == 2.0);
  dualopt::base_update(s, g);
  CHECK(s.base_m.value[0] == 0.95 * 2.0 + 2.0);
  CHECK(s.cached_base_m_hat[0] == s.base_m.value[0]);
}

TEST_CASE("delta_update with a zero cached base reduces to a plain EMA") {
  Buffer like = Buffer::zeros({1});
  DualState s = dualopt::make_dual_state(like, adamw_config());

  dualopt::delta_update(s, 0, Buffer::from_vector({2.0}));
  CHECK(std::fabs(s.delta_m[0].value[0] - 0.2) < 1e-15);
  CHECK(s.objective_counters[0] == 1);
  CHECK(s.global_counter == 1);
  // Only the touched objective's counter moves.
  CHECK(s.objective_counters[1] == 0);
}

TEST_CASE("delta states vanish when every objective sees the same stream") {
  Buffer like = Buffer::zeros({1});
  Buffer theta = Buffer::zeros({1});
  DualState s = dualopt::make_dual_state(like, adamw_config());
  Buffer g = Buffer::from_vector({0.7});

  for (int t = 1; t <= 1000; ++t) {
    dualopt::dualoptim_plus_step(theta, g, static_cast<std::size_t>(t % 2), s);
  }
  for (std::size_t obj = 0; obj < 2; ++obj) {
    CHECK(std::fabs(s.delta_m[obj].value[0]) < 1e-6 * 0.7);
    CHECK(std::fabs(s.delta_v[obj].value[0]) < 1e-6 * 0.49);
  }
  CHECK(std::fabs(s.base_m.value[0] - 0.7) < 1e-6);
}

TEST_CASE("parameter_update from zero states moves by about -lr") {
  Buffer theta = Buffer::zeros({1});
  DualState s = dualopt::make_dual_state(theta, adamw_config(1e-2, 0.0));

  dualopt::delta_update(s, 0, Buffer::from_vector({3.0}));
  dualopt::parameter_update(theta, s, 0);
  // Corrections cancel at t=1: step = -lr * 3 / (3 + eps).
  CHECK(std::fabs(theta[0] - (-1e-2 * 3.0 / (3.0 + 1e-8))) < 1e-15);
  CHECK(std::fabs(theta[0] + 1e-2) < 1e-9);
}

TEST_CASE("parameter_update requires a delta update for the objective first") {
  Buffer theta = Buffer::zeros({1});
  DualState s = dualopt::make_dual_state(theta, adamw_config());
  CHECK_THROWS_AS(dualopt::parameter_update(theta, s, 0), std::invalid_argument);
  CHECK_THROWS_AS(dualopt::parameter_update(theta, s, 7), std::invalid_argument);
}

TEST_CASE("a negative combined second moment is handled via its magnitude") {
  Buffer theta = Buffer::zeros({1});
  DualState s = dualopt::make_dual_state(theta, adamw_config(1e-2, 0.0));

  // Delta accumulated against a large cached second moment...
  s.cached_base_v_hat[0] = 4.0;
  dualopt::delta_update(s, 0, Buffer::from_vector({1.0}));
  // ...which has since collapsed, leaving v_hat_base + v_hat_delta < 0.
  s.cached_base_v_hat[0] = 0.5;

  dualopt::parameter_update(theta, s, 0);
  CHECK(theta.all_finite());
  // momentum = 0 + 1; denominator = sqrt(|0.5 + (1 - 4)|) + eps.
  const double expected = -1e-2 * 1.0 / (std::sqrt(2.5) + 1e-8);
  CHECK(std::fabs(theta[0] - expected) < 1e-15);
}

TEST_CASE("second step reconstructs a momentum above the plain-EMA value") {
  Buffer theta = Buffer::zeros({1});
  DualConfig c = adamw_config(1e-3, 0.0);
  c.n_objectives = 1;
  DualState s = dualopt::make_dual_state(theta, c);
  Buffer g = Buffer::from_vector({1.0});

  StepTrace trace;
  dualopt::dualoptim_plus_step(theta, g, 0, s, &trace);
  CHECK(std::fabs(trace.momentum[0] - 1.0) < 1e-12);

  dualopt::dualoptim_plus_step(theta, g, 0, s, &trace);
  // Stale cache g plus corrected residual beta1*g/(1+beta1):
  // (1 + 2*beta1) / (1 + beta1) = 2.8/1.9 for beta1 = 0.9.
  CHECK(std::fabs(trace.momentum[0] - (1.0 + 2.0 * 0.9) / (1.0 + 0.9)) < 1e-12);
}

TEST_CASE("per-step updates converge to the plain-AdamW asymptote") {
  dualopt::AdamWParams p;
  p.lr = 1e-3;
  p.weight_decay = 0.0;

  DualConfig c;
  c.adamw = p;
  c.n_objectives = 1;

  Buffer theta_dual = Buffer::zeros({1});
  Buffer theta_plain = Buffer::zeros({1});
  DualState s = dualopt::make_dual_state(theta_dual, c);
  dualopt::MomentState m{Buffer::zeros({1}), p.beta1, 0};
  dualopt::MomentState v{Buffer::zeros({1}), p.beta2, 0};
  Buffer g = Buffer::from_vector({1.0});

  double dual_delta = 0.0;
  double plain_delta = 0.0;
  for (int t = 1; t <= 1000; ++t) {
    const double before_dual = theta_dual[0];
    const double before_plain = theta_plain[0];
    dualopt::dualoptim_plus_step(theta_dual, g, 0, s);
    dualopt::adamw_step(theta_plain, g, m, v, p, t);
    dual_delta = theta_dual[0] - before_dual;
    plain_delta = theta_plain[0] - before_plain;
  }
  CHECK(std::fabs(dual_delta - plain_delta) < 1e-6 * std::fabs(plain_delta));
  // Early steps provably differ: at t=2 the reconstructed momentum exceeds
  // the plain bias-corrected one, so the trajectories are distinct.
  CHECK(theta_dual[0] != theta_plain[0]);
}

TEST_CASE("step ordering controls which cached base the step reads") {
  Buffer g = Buffer::from_vector({1.0});
  const double expect_fresh_momentum = 2.0;  // cache refreshed first: g + g
  const double expect_stale_momentum = 1.0;  // zero cache: 0 + g

  auto run_one = [&](BaseUpdateTiming timing) {
    DualConfig c = adamw_config(1e-2, 0.0);
    c.base_update_timing = timing;
    Buffer theta = Buffer::zeros({1});
    DualState s = dualopt::make_dual_state(theta, c);
    StepTrace trace;
    dualopt::dualoptim_plus_step(theta, g, 0, s, &trace);
    return std::make_pair(trace.momentum[0], s.delta_m[0].value[0]);
  };

  auto [m_after_param, d_after_param] = run_one(BaseUpdateTiming::AfterParam);
  CHECK(std::fabs(m_after_param - expect_stale_momentum) < 1e-12);
  CHECK(std::fabs(d_after_param - 0.1) < 1e-15);

  auto [m_after_delta, d_after_delta] = run_one(BaseUpdateTiming::AfterDelta);
  CHECK(std::fabs(m_after_delta - expect_fresh_momentum) < 1e-12);
  CHECK(std::fabs(d_after_delta - 0.1) < 1e-15);

  // Base first: the delta residual g - cached(g) collapses to zero.
  auto [m_before_delta, d_before_delta] = run_one(BaseUpdateTiming::BeforeDelta);
  CHECK(std::fabs(m_before_delta - expect_stale_momentum) < 1e-12);
  CHECK(d_before_delta == 0.0);
}

TEST_CASE("subtracting the delta from the base input freezes the base on step one") {
  Buffer g = Buffer::from_vector({1.0});
  DualConfig c = adamw_config(1e-2, 0.0);
  c.base_update_input = BaseUpdateInput::GradMinusDelta;
  Buffer theta = Buffer::zeros({1});
  DualState s = dualopt::make_dual_state(theta, c);

  dualopt::dualoptim_plus_step(theta, g, 0, s);
  // After the first delta update the corrected delta equals g, so the base
  // absorbs g - g = 0.
  CHECK(s.base_m.value[0] == 0.0);
  CHECK(s.base_m.steps == 1);

  DualConfig plain = adamw_config(1e-2, 0.0);
  Buffer theta2 = Buffer::zeros({1});
  DualState s2 = dualopt::make_dual_state(theta2, plain);
  dualopt::dualoptim_plus_step(theta2, g, 0, s2);
  CHECK(std::fabs(s2.base_m.value[0] - 0.1) < 1e-15);
}

TEST_CASE("three objectives keep the global counter equal to the counter sum") {
  Buffer theta = Buffer::zeros({4});
  DualConfig c = adamw_config();
  c.n_objectives = 3;
  DualState s = dualopt::make_dual_state(theta, c);

  for (int t = 1; t <= 99; ++t) {
    Buffer g = Buffer::full({4}, std::sin(0.1 * t));
    dualopt::dualoptim_plus_step(theta, g, static_cast<std::size_t>(t % 3), s);
    std::int64_t sum = 0;
    for (std::int64_t ti : s.objective_counters) sum += ti;
    REQUIRE(sum == s.global_counter);
  }
  CHECK(s.global_counter == 99);
  CHECK(s.objective_counters[0] == 33);
  CHECK(s.objective_counters[1] == 33);
  CHECK(s.objective_counters[2] == 33);
}

TEST_CASE("composed stepping stays finite over a scheduled run") {
  Buffer theta = Buffer::from_vector({0.5, -0.25, 1.0, 0.0});
  DualConfig c = adamw_config(1e-2, 0.01);
  DualState s = dualopt::make_dual_state(theta, c);
  dualopt::AlternationSchedule sched{1, 5, 300};

  for (std::int64_t t = 1; t <= sched.total_steps; ++t) {
    const std::size_t obj =
        dualopt::objective_at(sched, t) == dualopt::Objective::Forget ? 0u : 1u;
    Buffer g = Buffer::from_vector({std::sin(0.3 * t), std::cos(0.7 * t),
                                    0.2 * std::sin(0.11 * t), -0.4});
    dualopt::dualoptim_plus_step(theta, g, obj, s);
    REQUIRE(theta.all_finite());
  }
  CHECK(s.global_counter == 300);
  CHECK(s.objective_counters[0] == 50);
  CHECK(s.objective_counters[1] == 250);
}

TEST_CASE("a rejected step restores parameters and state bit-identically") {
  Buffer theta = Buffer::from_vector({0.4, -0.8});
  DualConfig c = adamw_config(1e-2, 0.01);
  DualState s = dualopt::make_dual_state(theta, c);
  for (int t = 1; t <= 7; ++t) {
    Buffer g = Buffer::from_vector({std::sin(1.0 * t), std::cos(2.0 * t)});
    dualopt::dualoptim_plus_step(theta, g, static_cast<std::size_t>(t % 2), s);
  }

  const Buffer theta_before = theta;
  const DualState before = s;

  // Invalid learning rate fails inside parameter_update, after the delta
  // update has already advanced counters and moments.
  s.config.adamw.lr = std::numeric_limits<double>::infinity();
  Buffer g = Buffer::from_vector({1.0, -1.0});
  CHECK_THROWS_AS(dualopt::dualoptim_plus_step(theta, g, 0, s), std::invalid_argument);

  CHECK(buffers_identical(theta, theta_before));
  CHECK(buffers_identical(s.base_m.value, before.base_m.value));
  CHECK(buffers_identical(s.base_v.value, before.base_v.value));
  CHECK(buffers_identical(s.cached_base_m_hat, before.cached_base_m_hat));
  CHECK(buffers_identical(s.cached_base_v_hat, before.cached_base_v_hat));
  CHECK(buffers_identical(s.delta_m[0].value, before.delta_m[0].value));
  CHECK(buffers_identical(s.delta_v[0].value, before.delta_v[0].value));
  CHECK(s.base_m.steps == before.base_m.steps);
  CHECK(s.delta_m[0].steps == before.delta_m[0].steps);
  CHECK(s.objective_counters == before.objective_counters);
  CHECK(s.global_counter == before.global_counter);
}

TEST_CASE("Muon-mode composed step matches its hand-built pieces") {
  DualConfig c;
  c.mode = OptimMode::Muon;
  c.muon.lr = 0.05;
  Buffer theta = Buffer::zeros({2, 2});
  DualState s = dualopt::make_dual_state(theta, c);
  Buffer g(std::vector<std::size_t>{2, 2}, {1.0, 0.25, -0.5, 0.75});

  dualopt::dualoptim_plus_step(theta, g, 0, s);

  // Fresh state: delta_m = g, momentum = 0 + g, direction = NS5(g).
  const Buffer o = dualopt::newton_schulz5(g, c.muon.ns_iterations, c.muon.ns_coefficients);
  for (std::size_t i = 0; i < theta.size(); ++i) CHECK(theta[i] == -c.muon.lr * o[i]);
  CHECK(buffers_identical(s.delta_m[0].value, g));
  CHECK(buffers_identical(s.base_m.value, g));  // raw: 0.95*0 + g
  CHECK(buffers_identical(s.cached_base_m_hat, g));
}

TEST_CASE("make_dual_state validates configuration") {
  Buffer like = Buffer::zeros({2});

  DualConfig none = adamw_config();
  none.n_objectives = 0;
  CHECK_THROWS_AS(dualopt::make_dual_state(like, none), std::invalid_argument);

  DualConfig muon_vec;
  muon_vec.mode = OptimMode::Muon;
  CHECK_THROWS_AS(dualopt::make_dual_state(like, muon_vec), std::invalid_argument);

  DualConfig bad_beta = adamw_config();
  bad_beta.adamw.beta1 = 1.0;
  CHECK_THROWS_AS(dualopt::make_dual_state(like, bad_beta), std::invalid_argument);

  DualConfig bad_eps = adamw_config();
  bad_eps.adamw.eps = 0.0;
  CHECK_THROWS_AS(dualopt::make_dual_state(like, bad_eps), std::invalid_argument);

  CHECK_THROWS_AS(dualopt::make_dual_state(Buffer(), adamw_config()), std::invalid_argument);
}

TEST_CASE("base momentum overrides apply to the base states only") {
  Buffer like = Buffer::zeros({2});
  DualConfig c = adamw_config();
  c.base_beta1 = 0.99;
  c.base_beta2 = 0.999;
  DualState s = dualopt::make_dual_state(like, c);

  CHECK(s.base_m.beta == 0.99);
  CHECK(s.base_v.beta == 0.999);
  CHECK(s.delta_m[0].beta == 0.9);
  CHECK(s.delta_v[0].beta == 0.95);
  CHECK(s.delta_m[1].beta == 0.9);
}

TEST_CASE("dualoptim_plus_step validates objective ids and gradients") {
  Buffer theta = Buffer::zeros({2});
  DualState s = dualopt::make_dual_state(theta, adamw_config());

  Buffer g = Buffer::from_vector({1.0, 2.0});
  CHECK_THROWS_AS(dualopt::dualoptim_plus_step(theta, g, 2, s), std::invalid_argument);

  Buffer bad = Buffer::from_vector({1.0, std::nan("")});
  CHECK_THROWS_AS(dualopt::dualoptim_plus_step(theta, bad, 0, s), std::invalid_argument);

  Buffer wrong = Buffer::from_vector({1.0});
  CHECK_THROWS_AS(dualopt::dualoptim_plus_step(theta, wrong, 0, s), std::invalid_argument);
  CHECK(s.global_counter == 0);
}
