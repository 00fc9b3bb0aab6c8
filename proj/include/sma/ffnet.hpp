#pragma once

#include <string>
#include <vector>

#include "sma/linalg.hpp"
#include "sma/rational.hpp"

namespace sma {

enum class SublayerKind { kLinReLU, kLin, kRound };

// One sublayer of a feedforward net. Weights are always stored exactly;
// float evaluation converts on the fly. A kRound sublayer is a named
// correction: structurally it materializes to two kLinReLU sublayers
// (d -> 2d -> d) computing round(z) = 3*relu(z - 1/3) - 3*relu(z - 2/3)
// coordinatewise on the first `round_active` coordinates (identity-free:
// coordinates >= round_active map to 0).
struct Sublayer {
  SublayerKind kind = SublayerKind::kLinReLU;
  Mat<Rational> W;   // out_dim x in_dim (empty for kRound)
  Vec<Rational> b;   // out_dim (empty for kRound)
  bool correction = false;  // marks sublayers that carry no trainable params
  int round_dim = 0;        // kRound: in = out dimension
  int round_active = 0;     // kRound: leading coordinates that get rounded

  int in_dim() const { return kind == SublayerKind::kRound ? round_dim : W.cols; }
  int out_dim() const { return kind == SublayerKind::kRound ? round_dim : W.rows; }
};

struct Net {
  int input_dim = 0;
  std::vector<Sublayer> sublayers;
  std::string meta;  // free-form JSON object text ("{}" if none)

  int output_dim() const {
    return sublayers.empty() ? input_dim : sublayers.back().out_dim();
  }
  void check_shapes() const;
};

// Expands every kRound sublayer into its two exact kLinReLU sublayers
// (both flagged correction = true). Other sublayers pass through.
Net materialize_rounds(const Net& net);

// Plain forward pass. If `record` is non-null it receives the post-sublayer
// activations h_1 .. h_L (input not included).
template <typename T>
Vec<T> forward(const Net& net, const Vec<T>& x, std::vector<Vec<T>>* record = nullptr);

// Parameter-space perturbed forward: theta' = theta + delta where theta is
// the flattened (W, b) of non-correction sublayers in order, followed by the
// flattened (W, b) of correction sublayers in order (kRound contributes its
// materialized weights). delta.size() must equal num_params(net, true).
Vec<double> forward_param_perturbed(const Net& net, const Vec<double>& x,
                                    const Vec<double>& delta);

// Number of scalar parameters; with_corrections counts correction sublayers
// (materialized for kRound) after the trainable ones.
long num_params(const Net& net, bool with_corrections);

// Canonical flattening (same order as forward_param_perturbed) and its inverse.
Vec<Rational> flatten(const Net& net, bool with_corrections);
void unflatten(Net& net, const Vec<Rational>& theta, bool with_corrections);

// ||theta||_1 over the trainable parameters (corrections excluded).
Rational l1_norm(const Net& net);

// Layer-based perturbed forward (all-layer margin semantics): after each
// sublayer i in the materialized net, h_i += delta_i * max(max_{j<=i-1} ||h_j||, 1)
// where delta slices follow sublayer output dims and h_0 = x.
Vec<double> forward_layer_perturbed(const Net& net, const Vec<double>& x,
                                    const std::vector<Vec<double>>& delta);

std::string net_to_json(const Net& net, NumericMode mode);
Net net_from_json(const std::string& text);

}  // namespace sma
