#pragma once

#include <cstdint>
#include <vector>

#include "dualopt/buffer.hpp"
#include "dualopt/optim.hpp"

namespace dualopt {

enum class BaselineKind { Joint, Alternate, DualOptim, Scaffold, FedCM, LocalAdam };

// A complete AdamW optimizer state: both moments plus the step counter used
// for bias correction.
struct AdamWState {
  MomentState m;
  MomentState v;
  std::int64_t t = 0;
};

AdamWState make_adamw_state(const Buffer& like, const AdamWParams& p);

// Advances the counter and applies one AdamW step against this state.
void plain_adamw_step(Buffer& theta, const Buffer& g, AdamWState& state, const AdamWParams& p);

// Single step on the combined gradient forget_weight*g_f + g_r, one shared
// optimizer. Bitwise identical to plain_adamw_step on the summed stream.
void joint_step(Buffer& theta, const Buffer& g_f, const Buffer& g_r, AdamWState& state,
                const AdamWParams& p, double forget_weight = 1.0);

// One shared optimizer fed whichever objective's gradient is active. The
// objective id is informational (the state layout does not depend on it).
void alternate_step(Buffer& theta, const Buffer& g, std::size_t objective, AdamWState& state,
                    const AdamWParams& p);

// Fully decoupled optimizers, one per objective; a step reads and writes
// only the selected state.
void dualoptim_step(Buffer& theta, const Buffer& g, std::size_t objective,
                    std::vector<AdamWState>& states, const AdamWParams& p);

// State for the federated-learning-derived variants, adapted to the
// two-objective alternating setting. Scaffold and FedCM keep a merge-only
// base plus per-objective deltas (first and second moment each); the base
// moves only at period boundaries, absorbing half the sum of the corrected
// deltas. LocalAdam keeps two full AdamW states whose moment values (not
// counters) are averaged at period boundaries.
struct FlState {
  BaselineKind kind = BaselineKind::Scaffold;
  Buffer base_m;
  Buffer base_v;
  std::vector<MomentState> delta_m;
  std::vector<MomentState> delta_v;
  std::vector<std::int64_t> objective_counters;
  std::vector<AdamWState> local;
  std::int64_t global_counter = 0;
};

FlState make_fl_state(const Buffer& like, BaselineKind kind, const AdamWParams& p);

// One step of the selected variant; `period` is the full alternation length
// F_f + F_r, and the periodic merge fires when the global step count reaches
// a multiple of it. `kind` must match the state's layout.
void fl_adapted_step(Buffer& theta, const Buffer& g, std::size_t objective, FlState& state,
                     BaselineKind kind, std::int64_t period, const AdamWParams& p);

}  // namespace dualopt
