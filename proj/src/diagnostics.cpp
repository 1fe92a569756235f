#include "dualopt/diagnostics.hpp"

#include <cstdio>
#include <set>
#include <stdexcept>

#include "dualopt/optim.hpp"

namespace dualopt {

SimilarityTrace update_similarity(const std::vector<StepDirections>& log,
                                  const std::string& series, bool use_preconditioned) {
  std::set<std::size_t> seen;
  for (const StepDirections& d : log) seen.insert(d.objective);
  if (seen.size() < 2) {
    throw std::invalid_argument("update_similarity: run never visits a second objective");
  }

  SimilarityTrace trace;
  trace.series = series;
  for (std::size_t i = 1; i < log.size(); ++i) {
    const StepDirections& prev = log[i - 1];
    const StepDirections& cur = log[i];
    if (prev.objective == cur.objective) {
      continue;
    }
    const Buffer& a = use_preconditioned ? prev.preconditioned : prev.momentum;
    const Buffer& b = use_preconditioned ? cur.preconditioned : cur.momentum;
    trace.steps.push_back(cur.step);
    trace.cosines.push_back(cosine_similarity(a, b));
  }
  return trace;
}

SimilarityTrace gradient_ema_similarity(const std::vector<Buffer>& stream_f,
                                        const std::vector<Buffer>& stream_r, double ema_factor) {
  if (stream_f.size() != stream_r.size()) {
    throw std::invalid_argument("gradient_ema_similarity: streams must have equal length");
  }
  SimilarityTrace trace;
  trace.series = "gradient_ema";
  if (stream_f.empty()) {
    return trace;
  }

  MomentState ema_f{zeros_like(stream_f[0]), ema_factor, 0};
  MomentState ema_r{zeros_like(stream_r[0]), ema_factor, 0};
  for (std::size_t i = 0; i < stream_f.size(); ++i) {
    ema_update(ema_f, stream_f[i]);
    ema_update(ema_r, stream_r[i]);
    trace.steps.push_back(static_cast<std::int64_t>(i) + 1);
    trace.cosines.push_back(cosine_similarity(ema_f.value, ema_r.value));
  }
  return trace;
}

double mean_after_burn_in(const SimilarityTrace& trace, std::int64_t burn_in) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    if (trace.steps[i] > burn_in) {
      sum += trace.cosines[i];
      count += 1;
    }
  }
  if (count == 0) {
    throw std::invalid_argument("mean_after_burn_in: no samples after the burn-in window");
  }
  return sum / static_cast<double>(count);
}

void write_similarity_csv(std::ostream& out, const std::vector<SimilarityTrace>& traces) {
  out << "step,series,cosine\n";
  char value[64];
  for (const SimilarityTrace& trace : traces) {
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
      std::snprintf(value, sizeof value, "%.17g", trace.cosines[i]);
      out << trace.steps[i] << ',' << trace.series << ',' << value << '\n';
    }
  }
}

}  // namespace dualopt
