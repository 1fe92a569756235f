#include "dualopt/quant8.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dualopt {

namespace {

std::array<double, 256> build_codebook() {
  std::array<double, 256> book{};
  std::size_t n = 0;
  for (int level = 0; level <= 6; ++level) {
    const int segments = 1 << level;  // boundaries = segments + 1
    const double scale = std::pow(10.0, static_cast<double>(level - 6));
    for (int k = 0; k < segments; ++k) {
      const double lo = 0.1 + 0.9 * static_cast<double>(k) / segments;
      const double hi = 0.1 + 0.9 * static_cast<double>(k + 1) / segments;
      const double mid = scale * 0.5 * (lo + hi);
      book[n++] = mid;
      book[n++] = -mid;
    }
  }
  book[n++] = 0.0;
  book[n++] = 1.0;
  std::sort(book.begin(), book.begin() + static_cast<std::ptrdiff_t>(n));
  return book;
}

std::uint8_t nearest_code(const std::array<double, 256>& book, double x) {
  const auto it = std::lower_bound(book.begin(), book.end(), x);
  if (it == book.begin()) return 0;
  if (it == book.end()) return 255;
  const std::size_t hi = static_cast<std::size_t>(it - book.begin());
  const std::size_t lo = hi - 1;
  return static_cast<std::uint8_t>(x - book[lo] <= book[hi] - x ? lo : hi);
}

}  // namespace

const std::array<double, 256>& dynamic_codebook() {
  static const std::array<double, 256> book = build_codebook();
  return book;
}

double codebook_max_gap() {
  static const double gap = [] {
    const auto& book = dynamic_codebook();
    double g = 0.0;
    for (std::size_t i = 1; i < book.size(); ++i) g = std::max(g, book[i] - book[i - 1]);
    return g;
  }();
  return gap;
}

QuantizedBuffer quantize(const Buffer& x, std::size_t block_size) {
  if (block_size < 1) {
    throw std::invalid_argument("quantize: block size must be >= 1");
  }
  if (!x.all_finite()) {
    throw std::invalid_argument("quantize: input contains non-finite values");
  }
  const auto& book = dynamic_codebook();

  QuantizedBuffer q;
  q.shape = x.shape();
  q.block_size = block_size;
  q.codes.resize(x.size());
  q.absmax.reserve((x.size() + block_size - 1) / block_size);

  for (std::size_t start = 0; start < x.size(); start += block_size) {
    const std::size_t stop = std::min(start + block_size, x.size());
    double amax = 0.0;
    for (std::size_t i = start; i < stop; ++i) amax = std::max(amax, std::fabs(x[i]));
    if (amax == 0.0) amax = 1.0;
    q.absmax.push_back(amax);
    for (std::size_t i = start; i < stop; ++i) {
      q.codes[i] = nearest_code(book, x[i] / amax);
    }
  }
  return q;
}

Buffer dequantize(const QuantizedBuffer& q) {
  const auto& book = dynamic_codebook();
  if (q.codes.empty()) {
    return Buffer();
  }
  Buffer out = q.shape.empty() ? Buffer::from_vector(std::vector<double>(q.codes.size(), 0.0))
                               : Buffer::zeros(q.shape);
  if (out.size() != q.codes.size()) {
    throw std::invalid_argument("dequantize: shape does not match code count");
  }
  for (std::size_t i = 0; i < q.codes.size(); ++i) {
    out[i] = book[q.codes[i]] * q.absmax[i / q.block_size];
  }
  return out;
}

namespace {

bool quantizes_base(QuantizedSubset s) {
  return s == QuantizedSubset::Base || s == QuantizedSubset::Both;
}

bool quantizes_delta(QuantizedSubset s) {
  return s == QuantizedSubset::Delta || s == QuantizedSubset::Both;
}

}  // namespace

void requantize_moment(MomentState& state, QuantizedBuffer& slot, std::size_t block_size) {
  slot = quantize(state.value, block_size);
  state.value = dequantize(slot);
}

QuantizedDualState make_quantized_dual_state(const Buffer& like, const DualConfig& config,
                                             QuantizedSubset subset, std::size_t block_size) {
  if (block_size < 1) {
    throw std::invalid_argument("make_quantized_dual_state: block size must be >= 1");
  }
  QuantizedDualState s;
  s.inner = make_dual_state(like, config);
  s.subset = subset;
  s.block_size = block_size;
  if (quantizes_base(subset)) {
    s.q_base_m = quantize(s.inner.base_m.value, block_size);
    if (config.mode == OptimMode::AdamW) {
      s.q_base_v = quantize(s.inner.base_v.value, block_size);
    }
  }
  if (quantizes_delta(subset)) {
    s.q_delta_m.reserve(config.n_objectives);
    for (const MomentState& d : s.inner.delta_m) {
      s.q_delta_m.push_back(quantize(d.value, block_size));
    }
    for (const MomentState& d : s.inner.delta_v) {
      s.q_delta_v.push_back(quantize(d.value, block_size));
    }
  }
  return s;
}

void quantized_state_step(Buffer& theta, const Buffer& g, std::size_t objective,
                          QuantizedDualState& state, StepTrace* trace) {
  if (state.subset == QuantizedSubset::None) {
    dualoptim_plus_step(theta, g, objective, state.inner, trace);
    return;
  }

  dualoptim_plus_step(theta, g, objective, state.inner, trace);

  DualState& inner = state.inner;
  if (quantizes_base(state.subset)) {
    requantize_moment(inner.base_m, state.q_base_m, state.block_size);
    if (inner.config.mode == OptimMode::AdamW) {
      requantize_moment(inner.base_v, state.q_base_v, state.block_size);
      // The cached base snapshot must describe the stored 8-bit values, not
      // the discarded 64-bit intermediates.
      inner.cached_base_m_hat = bias_correct(inner.base_m, inner.base_m.steps);
      inner.cached_base_v_hat = bias_correct(inner.base_v, inner.base_v.steps);
    } else {
      inner.cached_base_m_hat = inner.base_m.value;
    }
  }
  if (quantizes_delta(state.subset)) {
    requantize_moment(inner.delta_m[objective], state.q_delta_m[objective], state.block_size);
    if (!inner.delta_v.empty()) {
      requantize_moment(inner.delta_v[objective], state.q_delta_v[objective], state.block_size);
    }
  }
}

std::size_t quantized_payload_bytes(const QuantizedDualState& state) {
  std::size_t bytes = 0;
  if (quantizes_base(state.subset)) {
    bytes += state.q_base_m.payload_bytes() + state.q_base_v.payload_bytes();
  }
  if (quantizes_delta(state.subset)) {
    for (const QuantizedBuffer& q : state.q_delta_m) bytes += q.payload_bytes();
    for (const QuantizedBuffer& q : state.q_delta_v) bytes += q.payload_bytes();
  }
  return bytes;
}

std::size_t full_precision_payload_bytes(const QuantizedDualState& state) {
  std::size_t elems = 0;
  if (quantizes_base(state.subset)) {
    elems += state.inner.base_m.value.size() + state.inner.base_v.value.size();
  }
  if (quantizes_delta(state.subset)) {
    for (const MomentState& d : state.inner.delta_m) elems += d.value.size();
    for (const MomentState& d : state.inner.delta_v) elems += d.value.size();
  }
  return elems * sizeof(double);
}

double quantized_memory_ratio(const QuantizedDualState& state) {
  const std::size_t full = full_precision_payload_bytes(state);
  if (full == 0) {
    return 1.0;
  }
  return static_cast<double>(quantized_payload_bytes(state)) / static_cast<double>(full);
}

}  // namespace dualopt
