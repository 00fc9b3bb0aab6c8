#pragma once

#include "sma/transformer.hpp"
#include "sma/turing.hpp"

namespace sma {

struct Group {
  int offset = 0;
  int width = 0;
};

// Named coordinate groups of the compiled hidden vector. scrt is transient
// scratch wide enough for the (state,symbol) one-hot of the transition stage,
// the per-bit AND terms of the location adder, and the 3-way output selector.
struct CoordinateLayout {
  int d_pos = 0;
  Group st, sym1, sym2, pos1, pos2, pos3, scr1, scr2, scr3, scr4, scrt;
  int d_tm = 0;  // live width; the model may be padded wider

  std::string to_json() const;
};

CoordinateLayout make_layout(int num_states, int num_symbols, int d_pos);

// Adds the pre-init state (head starts at virtual cell 0, first step writes
// blank and moves onto cell 1), materializes terminal self-loops into delta,
// and extends the time bound by the extra step.
TMSpec augment_tm(const TMSpec& m);

struct TMCompileOptions {
  int target_width = 0;  // 0 = natural d_tm; larger values pad with zeros
};

struct CompiledTransformer {
  TransformerModel model;
  CoordinateLayout layout;
  TMSpec aug;  // augmented machine (reference semantics of the model)
};

// Individual construction stages, exposed for testing. All take the
// augmented spec and produce layers of width `width` >= layout.d_tm.
std::vector<TransformerLayer> build_transition_block(const TMSpec& aug,
                                                     const CoordinateLayout& lo, int width);
std::vector<TransformerLayer> build_location_block(const CoordinateLayout& lo, int width);
std::vector<TransformerLayer> build_search_stack(const CoordinateLayout& lo, int width);
std::vector<TransformerLayer> build_encoder_read_block(const CoordinateLayout& lo, int width);
std::vector<TransformerLayer> build_output_block(const TMSpec& aug,
                                                 const CoordinateLayout& lo, int width);

CompiledTransformer compile_tm(const TMSpec& m, const TMCompileOptions& opts = {});

// Exhaustive step-by-step comparison of the decoded hidden states against the
// machine's execution record, plus attention score-separation and binarity
// checks. Input uses the original machine's symbol indices.
struct TMVerifyReport {
  bool pass = true;
  long steps = 0;
  long checks = 0;
  std::optional<double> min_gap;  // smallest attention score separation
  std::string detail;             // first mismatch, empty when pass
};

TMVerifyReport verify_tm(const CompiledTransformer& ct, const std::vector<int>& input);

Rational l1_norm(const TransformerModel& m);

}  // namespace sma
