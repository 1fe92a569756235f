#include "dualopt/baselines.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dualopt {

namespace {

bool is_fl_kind(BaselineKind kind) {
  return kind == BaselineKind::Scaffold || kind == BaselineKind::FedCM ||
         kind == BaselineKind::LocalAdam;
}

void require_objective_in(std::size_t objective, std::size_t n, const char* where) {
  if (objective >= n) {
    throw std::invalid_argument(std::string(where) + ": unknown objective id " +
                                std::to_string(objective));
  }
}

// Corrected delta, or zero if the objective has never been updated (its
// correction denominator would be degenerate).
Buffer corrected_or_zero(const MomentState& state, std::int64_t counter) {
  if (counter <= 0) {
    return zeros_like(state.value);
  }
  return bias_correct(state, counter);
}

}  // namespace

AdamWState make_adamw_state(const Buffer& like, const AdamWParams& p) {
  if (like.empty()) {
    throw std::invalid_argument("make_adamw_state: parameter buffer must be non-empty");
  }
  return AdamWState{MomentState{zeros_like(like), p.beta1, 0},
                    MomentState{zeros_like(like), p.beta2, 0}, 0};
}

void plain_adamw_step(Buffer& theta, const Buffer& g, AdamWState& state, const AdamWParams& p) {
  state.t += 1;
  try {
    adamw_step(theta, g, state.m, state.v, p, state.t);
  } catch (...) {
    state.t -= 1;
    throw;
  }
}

void joint_step(Buffer& theta, const Buffer& g_f, const Buffer& g_r, AdamWState& state,
                const AdamWParams& p, double forget_weight) {
  require_same_shape(g_f, g_r, "joint_step");
  if (!std::isfinite(forget_weight)) {
    throw std::invalid_argument("joint_step: forget weight must be finite");
  }
  const Buffer g = add(scale(g_f, forget_weight), g_r);
  plain_adamw_step(theta, g, state, p);
}

void alternate_step(Buffer& theta, const Buffer& g, std::size_t, AdamWState& state,
                    const AdamWParams& p) {
  plain_adamw_step(theta, g, state, p);
}

void dualoptim_step(Buffer& theta, const Buffer& g, std::size_t objective,
                    std::vector<AdamWState>& states, const AdamWParams& p) {
  require_objective_in(objective, states.size(), "dualoptim_step");
  plain_adamw_step(theta, g, states[objective], p);
}

FlState make_fl_state(const Buffer& like, BaselineKind kind, const AdamWParams& p) {
  if (like.empty()) {
    throw std::invalid_argument("make_fl_state: parameter buffer must be non-empty");
  }
  if (!is_fl_kind(kind)) {
    throw std::invalid_argument("make_fl_state: kind must be Scaffold, FedCM or LocalAdam");
  }
  FlState s;
  s.kind = kind;
  if (kind == BaselineKind::LocalAdam) {
    s.local.assign(2, make_adamw_state(like, p));
  } else {
    s.base_m = zeros_like(like);
    s.base_v = zeros_like(like);
    s.delta_m.assign(2, MomentState{zeros_like(like), p.beta1, 0});
    s.delta_v.assign(2, MomentState{zeros_like(like), p.beta2, 0});
    s.objective_counters.assign(2, 0);
  }
  return s;
}

void fl_adapted_step(Buffer& theta, const Buffer& g, std::size_t objective, FlState& state,
                     BaselineKind kind, std::int64_t period, const AdamWParams& p) {
  if (!is_fl_kind(kind)) {
    throw std::invalid_argument("fl_adapted_step: unknown kind");
  }
  if (kind != state.kind) {
    throw std::invalid_argument("fl_adapted_step: kind does not match the state layout");
  }
  if (period < 1) {
    throw std::invalid_argument("fl_adapted_step: period must be >= 1");
  }
  require_objective_in(objective, 2, "fl_adapted_step");
  if (!g.all_finite()) {
    throw std::invalid_argument("fl_adapted_step: gradient contains non-finite values");
  }

  state.global_counter += 1;

  if (kind == BaselineKind::LocalAdam) {
    AdamWState& s = state.local[objective];
    plain_adamw_step(theta, g, s, p);
    if (state.global_counter % period == 0) {
      // Merge the moment values across objectives; counters stay local so
      // each state keeps its own bias-correction horizon.
      const Buffer mean_m = scale(add(state.local[0].m.value, state.local[1].m.value), 0.5);
      const Buffer mean_v = scale(add(state.local[0].v.value, state.local[1].v.value), 0.5);
      state.local[0].m.value = mean_m;
      state.local[1].m.value = mean_m;
      state.local[0].v.value = mean_v;
      state.local[1].v.value = mean_v;
    }
    return;
  }

  require_same_shape(theta, g, "fl_adapted_step");
  require_same_shape(theta, state.base_m, "fl_adapted_step");
  state.objective_counters[objective] += 1;
  const std::int64_t t_obj = state.objective_counters[objective];

  // Scaffold tracks the residual against the base; FedCM tracks the raw
  // gradient. Both keep per-objective first and second moments.
  if (kind == BaselineKind::Scaffold) {
    ema_update(state.delta_m[objective], sub(g, state.base_m));
    ema_update(state.delta_v[objective], sub(square(g), state.base_v));
  } else {
    ema_update(state.delta_m[objective], g);
    ema_update(state.delta_v[objective], square(g));
  }

  // Parameter update mirrors the base+delta reconstruction: corrected delta
  // on top of the (merge-scale) base, magnitude under the root.
  const Buffer m_hat = bias_correct(state.delta_m[objective], t_obj);
  const Buffer v_hat = bias_correct(state.delta_v[objective], t_obj);
  if (p.weight_decay != 0.0) {
    elementwise_inplace(theta, [&](double x) { return x * (1.0 - p.lr * p.weight_decay); });
  }
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double den = std::sqrt(std::fabs(state.base_v[i] + v_hat[i])) + p.eps;
    theta[i] -= p.lr * (state.base_m[i] + m_hat[i]) / den;
  }

  if (state.global_counter % period == 0) {
    const Buffer df_m = corrected_or_zero(state.delta_m[0], state.objective_counters[0]);
    const Buffer dr_m = corrected_or_zero(state.delta_m[1], state.objective_counters[1]);
    const Buffer df_v = corrected_or_zero(state.delta_v[0], state.objective_counters[0]);
    const Buffer dr_v = corrected_or_zero(state.delta_v[1], state.objective_counters[1]);
    axpy(state.base_m, 0.5, add(df_m, dr_m));
    axpy(state.base_v, 0.5, add(df_v, dr_v));
  }
}

}  // namespace dualopt
