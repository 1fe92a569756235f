#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "dualopt/buffer.hpp"

namespace dualopt {

// One labeled cosine-similarity series over steps.
struct SimilarityTrace {
  std::string series;
  std::vector<std::int64_t> steps;
  std::vector<double> cosines;
};

// One recorded step of a run: which objective acted and the update
// directions it produced, before the learning rate is applied.
struct StepDirections {
  std::int64_t step = 0;
  std::size_t objective = 0;
  Buffer momentum;
  Buffer preconditioned;
};

// Cosine between the update directions of each adjacent step pair where the
// objective changes; the emitted step index is the later step's. Uses the
// momentum directions by default, the fully preconditioned ones on request.
// Rejects logs that never visit at least two objectives.
SimilarityTrace update_similarity(const std::vector<StepDirections>& log,
                                  const std::string& series, bool use_preconditioned = false);

// Maintains one EMA per stream (ema <- factor*ema + (1-factor)*g) and emits
// their cosine at every step.
SimilarityTrace gradient_ema_similarity(const std::vector<Buffer>& stream_f,
                                        const std::vector<Buffer>& stream_r,
                                        double ema_factor = 0.9);

// Mean of the trace values at steps strictly greater than burn_in; rejects
// traces with no post-burn-in samples.
double mean_after_burn_in(const SimilarityTrace& trace, std::int64_t burn_in = 200);

// Long format, one row per sample: step,series,cosine.
void write_similarity_csv(std::ostream& out, const std::vector<SimilarityTrace>& traces);

}  // namespace dualopt
