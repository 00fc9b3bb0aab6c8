#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sma/linalg.hpp"
#include "sma/rational.hpp"

namespace sma {

// Hard-max attention parameters. All-zero parameters implement the identity
// (every score 0, every value 0, output = h').
struct AttentionParams {
  int d_k = 1;
  SpMat Wq, Wk, Wv;       // d_k x d, d_k x d, d x d
  Vec<Rational> bq, bk, bv;  // d_k, d_k, d
  Vec<Rational> k0;          // null key, d_k
  Vec<Rational> v0;          // null value, d

  static AttentionParams identity(int d);
};

// One feedforward ReLU sublayer inside a transformer layer; correction marks
// the saturating-ramp tail whose parameters belong to xi, not theta.
struct FFLayer {
  SpMat W;
  Vec<Rational> b;
  bool correction = false;
};

struct TransformerLayer {
  AttentionParams dec_attn;  // over the layer's own step history
  AttentionParams enc_attn;  // over the encoder outputs
  std::vector<FFLayer> ff;   // exactly three; slots 2-3 are the correction tail
                             // in compiled models
  std::string tag;           // which construction stage produced this layer
};

// Binary positional encoding target: Bin(i), MSB-first, written into `bits`
// consecutive coordinates starting at `offset`. bits == 0 disables it.
struct PosEncoding {
  int offset = 0;
  int bits = 0;
};

struct TransformerModel {
  int d = 0;
  SpMat E;                 // d x |A| symbol embeddings (encoder)
  PosEncoding enc_pos;     // added to encoder embeddings
  PosEncoding dec_pos;     // added to each decoder step input
  Vec<Rational> h0;        // initial decoder state o_0 (trainable)
  Vec<Rational> theta_cls; // linear read-out
  long T_prime = 0;        // decoder steps
  std::vector<TransformerLayer> layers;
  std::string meta;        // free-form JSON (layout block for compiled models)

  int num_layers() const { return static_cast<int>(layers.size()); }
};

// MSB-first binary encoding of i in `bits` bits.
std::vector<int> bin_encode(long i, int bits);
long bin_decode(const std::vector<int>& bits);

// Hard-max attention step: h' + (1/|J|) sum_{j in J} v_j where J is the
// argmax set over the null score and one score per history entry. Rational
// instantiation detects ties exactly; the float one admits scores within
// 1e-6 of the max. If gap is non-null it is lowered to max - (largest
// strictly smaller score) when that separation is smaller than the current
// value; calls where every candidate ties leave it untouched. decode threads
// one accumulator through every attention to get the model-wide minimum.
template <typename T>
Vec<T> hard_attend(const AttentionParams& p, const Vec<T>& h, const std::vector<Vec<T>>& H,
                   std::optional<double>* gap = nullptr);

template <typename T>
Vec<T> encode_symbol(const TransformerModel& m, int sym, long position);

template <typename T>
struct DecodeTrace {
  // states[i][j] = hidden state at step i+1 entering layer j (j = 0 is the
  // step input o_{i} ... + pos); states[i][L] is o_{i+1}.
  std::vector<std::vector<Vec<T>>> states;
  std::optional<double> min_gap;  // smallest attention score separation seen
};

template <typename T>
T decode(const TransformerModel& m, const std::vector<int>& input,
         DecodeTrace<T>* trace = nullptr);

// Shared-parameter flattening order: per layer (dec Wq,bq,Wk,bk,Wv,bv,k0,v0;
// enc likewise; non-correction ff W,b), then E, h0, theta_cls, then the
// correction ff parameters of every layer appended last.
long num_params(const TransformerModel& m, bool with_corrections);

// Perturbed float decode; delta covers the full flattened vector (corrections
// included) and is applied once per shared parameter.
double decode_param_perturbed(const TransformerModel& m, const std::vector<int>& input,
                              const Vec<double>& delta);

std::string transformer_to_json(const TransformerModel& m, NumericMode mode);
TransformerModel transformer_from_json(const std::string& text);

}  // namespace sma
