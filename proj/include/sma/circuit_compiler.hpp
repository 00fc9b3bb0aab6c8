#pragma once

#include "sma/circuit.hpp"
#include "sma/ffnet.hpp"

namespace sma {

struct CompileOptions {
  int target_width = 0;   // 0 = natural width; else must be >= natural
  int target_depth = 0;   // gate-block count; 0 = natural; else >= natural
  bool insert_corrections = true;
  NumericMode mode = NumericMode::kRational;
};

// One circuit layer of gates -> two LinearReLU sublayers on width `width`
// (first: gate preactivations; second: per-gate diagonal sign + bias).
// Exposed separately so the gadget truth tables are testable in isolation.
std::pair<Sublayer, Sublayer> gate_block(const std::vector<LayeredGate>& gates,
                                         int in_width, int width);

// Elementwise saturating-ramp correction on the first `active` coordinates;
// all other coordinates map to 0.
Sublayer round_gadget(int width, int active);

// x in {0,1}^r  ->  2*G(x) - 1 in {-1,+1}. Hidden layers have exact zeros on
// all padding coordinates.
Net compile(const LayeredCircuit& c, const CompileOptions& opts);

}  // namespace sma
