#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "sma/error.hpp"

namespace sma {

enum class GateKind { kInput, kAnd, kOr, kNot, kId };

int gate_arity(GateKind k);
const char* gate_kind_name(GateKind k);

struct Gate {
  std::string id;
  GateKind kind = GateKind::kInput;
  std::vector<int> args;  // indices into Circuit::gates
};

// Combinational circuit as a DAG in topological order. Inputs come first.
struct Circuit {
  std::vector<Gate> gates;   // inputs first, then declared gates in order
  int num_inputs = 0;        // r
  int output = -1;           // index into gates

  int num_gates_total() const { return static_cast<int>(gates.size()); }
};

// Gate inside a layered circuit; args index into the previous layer
// (layer 0 = the inputs).
struct LayeredGate {
  GateKind kind = GateKind::kId;
  std::vector<int> args;
};

struct LayeredCircuit {
  int num_inputs = 0;                          // r = m_0
  std::vector<std::vector<LayeredGate>> layers;  // g_1 .. g_{q-1}
  int output = -1;                             // position in last layer

  int depth() const { return static_cast<int>(layers.size()) + 1; }  // q
  int width() const;                                                 // m
  int size() const;                                                  // c
};

// Line-oriented netlist:
//   # comment
//   inputs x0 x1
//   gate g = AND x0 x1
//   output g
Circuit parse_circuit(const std::string& text);
std::string print_circuit(const Circuit& c);

LayeredCircuit layerize(const Circuit& c);

int evaluate(const Circuit& c, const std::vector<uint8_t>& x);
int evaluate(const LayeredCircuit& c, const std::vector<uint8_t>& x);

// Longest input-to-output path length, by brute force on the DAG. Test oracle
// for the layering depth.
int longest_path_to_output(const Circuit& c);

}  // namespace sma
