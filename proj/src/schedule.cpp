#include "dualopt/schedule.hpp"

#include <stdexcept>
#include <string>

namespace dualopt {

namespace {

void check_step_range(std::int64_t t, std::int64_t total, const char* where) {
  if (t < 1 || t > total)
    throw std::out_of_range(std::string(where) + ": step " + std::to_string(t) +
                            " outside [1, " + std::to_string(total) + "]");
}

}  // namespace

Objective objective_at(const AlternationSchedule& s, std::int64_t t) {
  if (s.forget_freq < 1) throw std::invalid_argument("objective_at: forget_freq must be >= 1");
  if (s.retain_freq < 0) throw std::invalid_argument("objective_at: retain_freq must be >= 0");
  check_step_range(t, s.total_steps, "objective_at");
  const std::int64_t period = s.forget_freq + s.retain_freq;
  return ((t - 1) % period) < s.forget_freq ? Objective::Forget : Objective::Retain;
}

double lr_at(const LrSchedule& s, std::int64_t t) {
  if (s.peak_lr < 0) throw std::invalid_argument("lr_at: peak_lr must be nonnegative");
  if (s.warmup_steps < 0) throw std::invalid_argument("lr_at: warmup_steps must be nonnegative");
  check_step_range(t, s.total_steps, "lr_at");
  if (t <= s.warmup_steps)
    return s.peak_lr * static_cast<double>(t) / static_cast<double>(s.warmup_steps);
  // Decay anchors at the step where the peak is reached (step 1 when there
  // is no warmup), so lr(1) == peak in the warmup-free case.
  const std::int64_t anchor = std::max<std::int64_t>(s.warmup_steps, 1);
  if (s.total_steps == anchor) return s.peak_lr;
  return s.peak_lr * static_cast<double>(s.total_steps - t) /
         static_cast<double>(s.total_steps - anchor);
}

}  // namespace dualopt
