#include "dualopt/dual_state.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>

namespace dualopt {

namespace {

void require_beta(double beta, const char* name) {
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw std::invalid_argument(std::string("make_dual_state: ") + name + " must lie in [0, 1)");
  }
}

void require_objective(const DualState& s, std::size_t objective, const char* where) {
  if (objective >= s.config.n_objectives) {
    throw std::invalid_argument(std::string(where) + ": unknown objective id " +
                                std::to_string(objective) + " (have " +
                                std::to_string(s.config.n_objectives) + ")");
  }
}

// Raw momentum accumulation (no (1-beta) scaling): value <- beta*value + g.
void raw_update(MomentState& state, const Buffer& g) {
  require_same_shape(state.value, g, "raw_update");
  const double beta = state.beta;
  elementwise_inplace(state.value, g, [beta](double s, double x) { return beta * s + x; });
  state.steps += 1;
}

// The input the base state accumulates this step. GradMinusDelta subtracts
// the active objective's (corrected) first-moment delta; a never-updated
// delta contributes nothing.
Buffer effective_base_input(const DualState& s, std::size_t objective, const Buffer& g) {
  if (s.config.base_update_input == BaseUpdateInput::Grad) {
    return g;
  }
  const std::int64_t t_obj = s.objective_counters[objective];
  if (t_obj <= 0) {
    return g;
  }
  if (s.config.mode == OptimMode::AdamW) {
    return sub(g, bias_correct(s.delta_m[objective], t_obj));
  }
  return sub(g, s.delta_m[objective].value);
}

}  // namespace

DualState make_dual_state(const Buffer& like, const DualConfig& config) {
  if (like.empty()) {
    throw std::invalid_argument("make_dual_state: parameter buffer must be non-empty");
  }
  if (config.n_objectives < 1) {
    throw std::invalid_argument("make_dual_state: need at least one objective");
  }
  if (config.mode == OptimMode::Muon && !like.is_matrix()) {
    throw std::invalid_argument("make_dual_state: Muon mode needs matrix parameters");
  }

  const bool adamw = config.mode == OptimMode::AdamW;
  const double delta_b1 = adamw ? config.adamw.beta1 : config.muon.momentum;
  const double delta_b2 = config.adamw.beta2;
  const double base_b1 = config.base_beta1.value_or(delta_b1);
  const double base_b2 = config.base_beta2.value_or(delta_b2);
  require_beta(delta_b1, "beta1");
  require_beta(base_b1, "base_beta1");
  if (adamw) {
    require_beta(delta_b2, "beta2");
    require_beta(base_b2, "base_beta2");
    if (!(config.adamw.eps > 0.0)) {
      throw std::invalid_argument("make_dual_state: eps must be positive");
    }
  }

  DualState s;
  s.config = config;
  s.base_m = MomentState{zeros_like(like), base_b1, 0};
  s.cached_base_m_hat = zeros_like(like);
  s.delta_m.assign(config.n_objectives, MomentState{zeros_like(like), delta_b1, 0});
  if (adamw) {
    s.base_v = MomentState{zeros_like(like), base_b2, 0};
    s.cached_base_v_hat = zeros_like(like);
    s.delta_v.assign(config.n_objectives, MomentState{zeros_like(like), delta_b2, 0});
  }
  s.objective_counters.assign(config.n_objectives, 0);
  s.global_counter = 0;
  return s;
}

void base_update(DualState& state, const Buffer& g) {
  require_same_shape(state.base_m.value, g, "base_update");
  if (state.config.mode == OptimMode::AdamW) {
    ema_update(state.base_m, g);
    ema_update(state.base_v, square(g));
    state.cached_base_m_hat = bias_correct(state.base_m, state.base_m.steps);
    state.cached_base_v_hat = bias_correct(state.base_v, state.base_v.steps);
  } else {
    raw_update(state.base_m, g);
    state.cached_base_m_hat = state.base_m.value;
  }
}

void delta_update(DualState& state, std::size_t objective, const Buffer& g) {
  require_objective(state, objective, "delta_update");
  require_same_shape(state.base_m.value, g, "delta_update");

  state.objective_counters[objective] += 1;
  state.global_counter += 1;

  if (state.config.mode == OptimMode::AdamW) {
    ema_update(state.delta_m[objective], sub(g, state.cached_base_m_hat));
    ema_update(state.delta_v[objective], sub(square(g), state.cached_base_v_hat));
  } else {
    raw_update(state.delta_m[objective], sub(g, state.cached_base_m_hat));
  }
}

void parameter_update(Buffer& theta, DualState& state, std::size_t objective, StepTrace* trace) {
  require_objective(state, objective, "parameter_update");
  require_same_shape(theta, state.base_m.value, "parameter_update");
  const std::int64_t t_obj = state.objective_counters[objective];
  if (t_obj <= 0) {
    throw std::invalid_argument("parameter_update: objective has no delta update yet");
  }

  Buffer momentum;
  Buffer direction;
  Buffer next = theta;
  double lr = 0.0;

  if (state.config.mode == OptimMode::AdamW) {
    const AdamWParams& p = state.config.adamw;
    lr = p.lr;
    if (p.weight_decay != 0.0) {
      elementwise_inplace(next, [&](double x) { return x * (1.0 - p.lr * p.weight_decay); });
    }
    momentum = add(state.cached_base_m_hat, bias_correct(state.delta_m[objective], t_obj));
    const Buffer v_hat_delta = bias_correct(state.delta_v[objective], t_obj);
    direction = momentum;
    for (std::size_t i = 0; i < direction.size(); ++i) {
      // The combined second moment can be negative (delta_v is a signed
      // residual), so take the magnitude before the root.
      const double den =
          std::sqrt(std::fabs(state.cached_base_v_hat[i] + v_hat_delta[i])) + p.eps;
      direction[i] = momentum[i] / den;
    }
  } else {
    const MuonParams& p = state.config.muon;
    lr = p.lr;
    momentum = add(state.cached_base_m_hat, state.delta_m[objective].value);
    direction = newton_schulz5(momentum, p.ns_iterations, p.ns_coefficients);
  }

  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw std::invalid_argument("parameter_update: learning rate must be finite and >= 0");
  }
  axpy(next, -lr, direction);
  if (!next.all_finite()) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "parameter_update: non-finite result (objective=%zu, t_obj=%lld, "
                  "|momentum|max=%g, |direction|max=%g)",
                  objective, static_cast<long long>(t_obj), max_abs(momentum),
                  max_abs(direction));
    throw std::runtime_error(msg);
  }

  if (trace != nullptr) {
    trace->objective = objective;
    trace->momentum = std::move(momentum);
    trace->preconditioned = std::move(direction);
  }
  theta = std::move(next);
}

void dualoptim_plus_step(Buffer& theta, const Buffer& g, std::size_t objective, DualState& state,
                         StepTrace* trace) {
  require_objective(state, objective, "dualoptim_plus_step");
  require_same_shape(theta, g, "dualoptim_plus_step");
  require_same_shape(theta, state.base_m.value, "dualoptim_plus_step");
  if (!g.all_finite()) {
    throw std::invalid_argument("dualoptim_plus_step: gradient contains non-finite values");
  }

  // Snapshot exactly the pieces a step can touch so a failing component
  // leaves the caller's view bit-identical.
  struct Snapshot {
    Buffer theta;
    MomentState base_m;
    MomentState base_v;
    Buffer cached_m;
    Buffer cached_v;
    MomentState delta_m;
    MomentState delta_v;
    std::int64_t t_obj;
    std::int64_t t;
  } snap{theta,
         state.base_m,
         state.base_v,
         state.cached_base_m_hat,
         state.cached_base_v_hat,
         state.delta_m[objective],
         state.delta_v.empty() ? MomentState{} : state.delta_v[objective],
         state.objective_counters[objective],
         state.global_counter};

  try {
    switch (state.config.base_update_timing) {
      case BaseUpdateTiming::BeforeDelta:
        base_update(state, effective_base_input(state, objective, g));
        delta_update(state, objective, g);
        parameter_update(theta, state, objective, trace);
        break;
      case BaseUpdateTiming::AfterDelta:
        delta_update(state, objective, g);
        base_update(state, effective_base_input(state, objective, g));
        parameter_update(theta, state, objective, trace);
        break;
      case BaseUpdateTiming::AfterParam:
        delta_update(state, objective, g);
        parameter_update(theta, state, objective, trace);
        base_update(state, effective_base_input(state, objective, g));
        break;
    }
  } catch (...) {
    theta = std::move(snap.theta);
    state.base_m = std::move(snap.base_m);
    state.base_v = std::move(snap.base_v);
    state.cached_base_m_hat = std::move(snap.cached_m);
    state.cached_base_v_hat = std::move(snap.cached_v);
    state.delta_m[objective] = std::move(snap.delta_m);
    if (!state.delta_v.empty()) {
      state.delta_v[objective] = std::move(snap.delta_v);
    }
    state.objective_counters[objective] = snap.t_obj;
    state.global_counter = snap.t;
    throw;
  }
}

}  // namespace dualopt
