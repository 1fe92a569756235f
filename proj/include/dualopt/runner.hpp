#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "dualopt/baselines.hpp"
#include "dualopt/diagnostics.hpp"
#include "dualopt/dual_state.hpp"
#include "dualopt/quant8.hpp"
#include "dualopt/schedule.hpp"
#include "dualopt/tasks.hpp"

namespace dualopt {

enum class Method { Joint, Alternate, DualOptim, DualOptimPlus, Scaffold, FedCM, LocalAdam };

// Effective configuration of one experiment run. Every field has a config
// key of the same name (see docs/config.md); the echo in the report lists
// them all in canonical form.
struct RunConfig {
  Method method = Method::DualOptimPlus;
  TaskKind task = TaskKind::ConflictingQuadratic;
  std::size_t dim = 16;
  std::int64_t total_steps = 300;
  std::int64_t forget_freq = 1;
  std::int64_t retain_freq = 5;
  double peak_lr = 1e-2;
  std::int64_t warmup_steps = 0;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.01;
  OptimMode mode = OptimMode::AdamW;
  double muon_momentum = 0.95;
  std::int64_t ns_iterations = 5;
  BaseUpdateTiming base_update_timing = BaseUpdateTiming::AfterParam;
  BaseUpdateInput base_update_input = BaseUpdateInput::Grad;
  std::optional<double> base_beta1;
  std::optional<double> base_beta2;
  QuantizedSubset quantize_states = QuantizedSubset::None;
  std::size_t block_size = 256;
  double forget_weight = 1.0;
  double clip_radius = 10.0;
  // > 0 starts theta at (retain anchor) + offset * random unit vector;
  // 0 starts at the origin.
  double theta0_offset = 0.0;
  std::uint64_t seed = 0;
};

struct RunRow {
  std::int64_t step = 0;
  std::size_t objective = 0;  // the scheduled objective (Joint consumes both)
  double lr = 0.0;
  std::vector<double> losses;  // one per objective, evaluated after the step
};

struct RunReport {
  RunConfig config;
  std::vector<std::pair<std::string, std::string>> config_echo;
  std::vector<RunRow> rows;
  std::vector<SimilarityTrace> traces;
  std::vector<double> final_losses;
  std::uint64_t params_digest = 0;
  bool diverged = false;
  double wall_seconds = 0.0;  // informational; excluded from the content hash

  // Digest of everything reproducible: config echo, rows, traces, final
  // parameter digest and the diverged flag.
  std::uint64_t content_hash() const;
};

struct SweepOutcome {
  RunReport report;
  bool failed = false;
  std::string error;
};

// FNV-1a over raw bytes, chainable via the h argument.
std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t h = 14695981039346656037ULL);

const char* method_name(Method m);

// Deterministic given the config (single-threaded, seeded); records per-step
// losses for every objective and per-step update directions, builds the
// similarity traces for alternating methods, and flags divergence (any
// non-finite loss or parameter) by truncating the row log at the offending
// step.
RunReport run_experiment(const RunConfig& config);

// One run per grid point; an individual failure is captured in its outcome
// and the sweep continues.
std::vector<SweepOutcome> sweep(const std::vector<RunConfig>& grid);

// step,objective,lr,losses... - one row per recorded step.
void write_report_csv(std::ostream& out, const RunReport& report);

// One row per run: identifying config columns, final losses, post-burn-in
// mean similarities, the diverged flag and any hard error.
void write_summary_csv(std::ostream& out, const std::vector<SweepOutcome>& outcomes);

}  // namespace dualopt
