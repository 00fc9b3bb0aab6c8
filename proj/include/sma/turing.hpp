#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sma/error.hpp"

namespace sma {

// Single-tape machine. States and symbols are kept as strings at the API
// boundary and as dense indices internally.
struct TMSpec {
  std::vector<std::string> states;    // Z, ordered; k = |Z|
  std::vector<std::string> alphabet;  // A, ordered
  int blank = -1;                     // index into alphabet
  int init = -1;                      // index into states
  std::set<int> accept;
  std::set<int> reject;
  // delta[(z, a)] -> (z', a', move); move in {-1, +1}. Defined for every
  // non-terminal state; terminal states implicitly self-loop (z, a, +1).
  struct Step {
    int next_state;
    int write;
    int move;
  };
  std::map<std::pair<int, int>, Step> delta;
  long time_bound = 0;  // T

  int num_states() const { return static_cast<int>(states.size()); }
  int num_symbols() const { return static_cast<int>(alphabet.size()); }
  bool is_terminal(int z) const { return accept.count(z) || reject.count(z); }

  int state_index(const std::string& s) const;
  int symbol_index(const std::string& s) const;

  // Transition including the terminal self-loop convention.
  Step step(int z, int a) const;
};

// Full execution record over exactly T steps (terminal states self-loop).
struct TMTrace {
  long T = 0;
  std::vector<int> state;   // z_0 .. z_T
  std::vector<int> sym;     // a_0 .. a_T (symbol under the head)
  std::vector<long> loc;    // loc_0 .. loc_T
  std::vector<int> written;  // w_1 .. w_T (written[i-1] = w_i)
  std::vector<int> move;     // q_1 .. q_T in {-1,+1}
  std::optional<long> halted_at;  // first step with terminal state, if any

  bool terminated() const { return halted_at.has_value(); }
  // decision: 1 iff z_T in accept (callers pair with the spec).
};

TMSpec parse_tm(const std::string& json_text);
std::string tm_to_json(const TMSpec& m);

// Runs exactly m.time_bound steps. Input symbols occupy cells
// start_loc_offset==1: cells 1..n with the head starting at cell 1 (default);
// the compiler uses start_loc 0 with input still at cells 1..n.
TMTrace simulate(const TMSpec& m, const std::vector<int>& input, long start_loc = 1);

// Convenience: input given as symbol strings.
TMTrace simulate(const TMSpec& m, const std::vector<std::string>& input);

// i' = max{1 <= t <= i : loc_{t-1} = loc_i}, or 0. Linear scan; this is the
// oracle the attention search stack is checked against.
long last_writer(const TMTrace& tr, long i);

// 1 iff final state is accepting.
int decision(const TMSpec& m, const TMTrace& tr);

}  // namespace sma
