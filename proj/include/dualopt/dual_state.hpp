#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dualopt/buffer.hpp"
#include "dualopt/optim.hpp"

namespace dualopt {

enum class OptimMode { AdamW, Muon };

// When, within a step, the base state absorbs the gradient. The cached base
// snapshot is refreshed by the base update, so this ordering decides whether
// the delta and parameter updates see last step's base (AfterParam) or this
// step's (BeforeDelta / AfterDelta for the parameter update).
enum class BaseUpdateTiming { BeforeDelta, AfterDelta, AfterParam };

// What the base state accumulates: the raw gradient, or the gradient with
// the active objective's corrected first-moment delta subtracted.
enum class BaseUpdateInput { Grad, GradMinusDelta };

struct DualConfig {
  OptimMode mode = OptimMode::AdamW;
  std::size_t n_objectives = 2;
  BaseUpdateTiming base_update_timing = BaseUpdateTiming::AfterParam;
  BaseUpdateInput base_update_input = BaseUpdateInput::Grad;
  AdamWParams adamw;
  MuonParams muon;
  // Per-state overrides so the base can run a different momentum horizon
  // than the deltas; unset means the shared defaults above.
  std::optional<double> base_beta1;
  std::optional<double> base_beta2;
};

// Shared base state plus one delta state per objective. The second-moment
// pieces (base_v, delta_v, cached_base_v_hat) are maintained in AdamW mode
// only; Muon keeps raw first momenta with no bias correction.
struct DualState {
  DualConfig config;

  MomentState base_m;
  MomentState base_v;

  // Base as visible to this step's delta and parameter updates: the
  // bias-corrected base (AdamW) or raw base momentum (Muon) captured when
  // the base last updated. Under the default AfterParam timing this is the
  // end of the previous step, so readers within a step are stale by one.
  Buffer cached_base_m_hat;
  Buffer cached_base_v_hat;

  std::vector<MomentState> delta_m;
  std::vector<MomentState> delta_v;

  std::vector<std::int64_t> objective_counters;
  std::int64_t global_counter = 0;
};

// Per-step directions exposed for similarity diagnostics. Both are the
// pre-learning-rate update: `momentum` is the reconstructed first moment,
// `preconditioned` the actual direction applied to the parameters.
struct StepTrace {
  std::size_t objective = 0;
  Buffer momentum;
  Buffer preconditioned;
};

DualState make_dual_state(const Buffer& like, const DualConfig& config);

// base_m <- b1*base_m + (1-b1)*g and base_v <- b2*base_v + (1-b2)*g^2
// (Muon: base_m <- b*base_m + g, no second moment), then the cached base
// snapshot is refreshed. Callers composing a full step pass the effective
// input chosen by config.base_update_input.
void base_update(DualState& state, const Buffer& g);

// Advances the objective's counter (and the global counter with it), then
// folds the residual g - cached_base into that objective's delta states.
void delta_update(DualState& state, std::size_t objective, const Buffer& g);

// AdamW: theta *= (1 - lr*wd), then theta -= lr * (B_hat + D_hat_m) /
// (sqrt(|B_hat_v + D_hat_v|) + eps), deltas corrected by the objective
// counter. The absolute value is required: delta_v tracks a signed residual,
// so the combined second moment can be negative. Muon: theta -= lr *
// newton_schulz5(cached_base + delta_m). Rejects non-finite results.
void parameter_update(Buffer& theta, DualState& state, std::size_t objective,
                      StepTrace* trace = nullptr);

// One full step: delta_update, parameter_update, base_update, ordered per
// config.base_update_timing (default: base last). Transactional; on any
// rejection theta and the state are restored bit-identically and the error
// propagates.
void dualoptim_plus_step(Buffer& theta, const Buffer& g, std::size_t objective, DualState& state,
                         StepTrace* trace = nullptr);

}  // namespace dualopt
