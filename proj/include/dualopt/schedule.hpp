#pragma once

#include <cstdint>

namespace dualopt {

enum class Objective : std::size_t { Forget = 0, Retain = 1 };

// One alternation plan: F_f consecutive forget steps then F_r retain steps,
// repeating. F_r = 0 degenerates to forget-only.
struct AlternationSchedule {
  std::int64_t forget_freq = 1;
  std::int64_t retain_freq = 5;
  std::int64_t total_steps = 300;
};

// Piecewise-linear learning rate: ramp 0 -> peak over warmup_steps, then
// linear decay to 0 at total_steps. lr_at(warmup_steps) == peak.
struct LrSchedule {
  double peak_lr = 1e-2;
  std::int64_t warmup_steps = 0;
  std::int64_t total_steps = 300;
};

// Steps are 1-indexed. A period of F_f + F_r steps contains exactly F_f
// forget steps: forget iff ((t-1) mod (F_f+F_r)) < F_f.
Objective objective_at(const AlternationSchedule& s, std::int64_t t);

double lr_at(const LrSchedule& s, std::int64_t t);

}  // namespace dualopt
