#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "dualopt/buffer.hpp"
#include "dualopt/dual_state.hpp"

namespace dualopt {

// Signed dynamic 8-bit codebook: 254 entries of the form ±10^(i-6) * mid,
// where for each magnitude level i in 0..6 the mids are the midpoints of
// 2^i + 1 evenly spaced boundaries over [0.1, 1.0], plus the exact entries
// 0.0 and 1.0. Sorted ascending; spans [-0.99296875, 1.0].
const std::array<double, 256>& dynamic_codebook();

// Largest gap between adjacent codebook entries; half of it bounds the
// normalized roundtrip error.
double codebook_max_gap();

struct QuantizedBuffer {
  std::vector<std::uint8_t> codes;
  std::vector<double> absmax;
  std::vector<std::size_t> shape;
  std::size_t block_size = 256;

  std::size_t size() const { return codes.size(); }
  // Bytes actually stored between steps: one code per element plus one
  // 64-bit scale per block.
  std::size_t payload_bytes() const {
    return codes.size() * sizeof(std::uint8_t) + absmax.size() * sizeof(double);
  }
};

// Per block of `block_size` elements (last block ragged): absmax = max|x|
// (1 if the block is all zero), each element mapped to the nearest codebook
// entry of x/absmax.
QuantizedBuffer quantize(const Buffer& x, std::size_t block_size = 256);

// element = codebook[code] * block absmax, original shape restored.
Buffer dequantize(const QuantizedBuffer& q);

// Re-quantize a moment state in place: stores fresh codes in `slot` and
// replaces the working value with their dequantized image, so memory and
// storage agree bitwise.
void requantize_moment(MomentState& state, QuantizedBuffer& slot, std::size_t block_size);

enum class QuantizedSubset { None, Base, Delta, Both };

// DualState whose selected moment states live in 8-bit form between steps:
// each step runs in 64-bit, then the selected states are re-quantized and
// the working copies replaced with their dequantized images, so the next
// step sees exactly what the 8-bit storage holds.
struct QuantizedDualState {
  DualState inner;
  QuantizedSubset subset = QuantizedSubset::None;
  std::size_t block_size = 256;

  QuantizedBuffer q_base_m;
  QuantizedBuffer q_base_v;
  std::vector<QuantizedBuffer> q_delta_m;
  std::vector<QuantizedBuffer> q_delta_v;
};

QuantizedDualState make_quantized_dual_state(const Buffer& like, const DualConfig& config,
                                             QuantizedSubset subset, std::size_t block_size = 256);

// One full dualoptim_plus_step with the storage policy above. subset=None is
// a strict pass-through (bitwise identical to the unquantized step).
void quantized_state_step(Buffer& theta, const Buffer& g, std::size_t objective,
                          QuantizedDualState& state, StepTrace* trace = nullptr);

// Bytes held between steps by the selected states in 8-bit form, and what
// the same states would occupy as 64-bit buffers.
std::size_t quantized_payload_bytes(const QuantizedDualState& state);
std::size_t full_precision_payload_bytes(const QuantizedDualState& state);

// quantized_payload_bytes / full_precision_payload_bytes; 1.0 when nothing
// is selected.
double quantized_memory_ratio(const QuantizedDualState& state);

}  // namespace dualopt
