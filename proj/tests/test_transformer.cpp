#include <doctest.h>

#include <random>

#include "sma/error.hpp"
#include "sma/transformer.hpp"

using namespace sma;

namespace {

Rational Q(long n, long d = 1) { return Rational(n, d); }

SpMat sp_identity(int d) {
  SpMat m(d, d);
  for (int i = 0; i < d; ++i) m.set(i, i, Q(1));
  return m;
}

FFLayer ff_identity(int d) {
  FFLayer f;
  f.W = sp_identity(d);
  f.b = Vec<Rational>(d, Q(0));
  return f;
}

// L identity layers over dimension d with `bits` decoder position bits.
TransformerModel identity_model(int d, int L, int bits, long T_prime) {
  TransformerModel m;
  m.d = d;
  m.E = SpMat(d, 1);
  m.dec_pos = {0, bits};
  m.h0 = Vec<Rational>(d, Q(0));
  m.theta_cls = Vec<Rational>(d, Q(1));
  m.T_prime = T_prime;
  for (int l = 0; l < L; ++l) {
    TransformerLayer lay;
    lay.dec_attn = AttentionParams::identity(d);
    lay.enc_attn = AttentionParams::identity(d);
    lay.ff = {ff_identity(d)};
    lay.tag = "test";
    m.layers.push_back(std::move(lay));
  }
  m.meta = "{}";
  return m;
}

}  // namespace

TEST_CASE("binary position codes") {
  CHECK(bin_encode(0, 4) == std::vector<int>{0, 0, 0, 0});
  CHECK(bin_encode(5, 4) == std::vector<int>{0, 1, 0, 1});
  CHECK(bin_encode(15, 4) == std::vector<int>{1, 1, 1, 1});
  CHECK(bin_decode({0, 1, 0, 1}) == 5);
  for (long i = 0; i < 64; ++i) CHECK(bin_decode(bin_encode(i, 6)) == i);
  CHECK_THROWS_AS(bin_encode(16, 4), Error);
  CHECK_THROWS_AS(bin_encode(-1, 4), Error);
}

TEST_CASE("hard attention: all-zero parameters are the identity") {
  auto p = AttentionParams::identity(3);
  Vec<Rational> h = {Q(1), Q(2), Q(3)};
  std::vector<Vec<Rational>> H = {{Q(5), Q(5), Q(5)}, {Q(-1), Q(0), Q(7)}};
  std::optional<double> gap;
  CHECK(hard_attend<Rational>(p, h, H, &gap) == h);
  CHECK_FALSE(gap.has_value());  // every score ties: vacuous separation
}

TEST_CASE("hard attention: singleton winner and tie averaging") {
  // d = 2, d_k = 1. Query constant 1; key reads coordinate 0; null key 0.
  // Value passes the history entry through.
  AttentionParams p;
  p.d_k = 1;
  p.Wq = SpMat(1, 2);
  p.bq = {Q(1)};
  p.Wk = SpMat(1, 2);
  p.Wk.set(0, 0, Q(1));
  p.bk = {Q(0)};
  p.Wv = sp_identity(2);
  p.bv = Vec<Rational>(2, Q(0));
  p.k0 = {Q(0)};
  p.v0 = Vec<Rational>(2, Q(0));

  Vec<Rational> h = {Q(0), Q(0)};
  std::optional<double> gap;

  // Scores: null 0, entries score = their coordinate 0.
  std::vector<Vec<Rational>> H = {{Q(2), Q(10)}, {Q(1), Q(20)}};
  auto y = hard_attend<Rational>(p, h, H, &gap);
  CHECK(y == Vec<Rational>{Q(2), Q(10)});
  REQUIRE(gap.has_value());
  CHECK(*gap == doctest::Approx(1.0));  // 2 vs 1

  // Two-way tie averages the values.
  gap.reset();
  H = {{Q(2), Q(10)}, {Q(2), Q(20)}};
  y = hard_attend<Rational>(p, h, H, &gap);
  CHECK(y == Vec<Rational>{Q(2), Q(15)});
  CHECK(*gap == doctest::Approx(2.0));  // 2 vs null 0

  // Null wins: output unchanged.
  gap.reset();
  H = {{Q(-3), Q(10)}};
  y = hard_attend<Rational>(p, h, H, &gap);
  CHECK(y == h);
  CHECK(*gap == doctest::Approx(3.0));

  // Float instantiation treats near-ties (within 1e-6) as exact.
  std::vector<Vec<double>> Hf = {{2.0, 10.0}, {2.0 + 1e-9, 20.0}};
  auto yf = hard_attend<double>(p, Vec<double>{0, 0}, Hf, nullptr);
  CHECK(yf[1] == doctest::Approx(15.0).epsilon(1e-6));
}

TEST_CASE("identity model unrolls to a position-bit sum") {
  // Every layer is the identity, so o_i = o_{i-1} + Bin(i): the readout sees
  // the column sums of the binary codes of 1..T'.
  const int bits = 3;
  const long T = 5;
  TransformerModel m = identity_model(4, 3, bits, T);
  std::vector<long> colsum(bits, 0);
  for (long i = 1; i <= T; ++i) {
    auto bi = bin_encode(i, bits);
    for (int j = 0; j < bits; ++j) colsum[j] += bi[j];
  }
  long want = colsum[0] + colsum[1] + colsum[2];
  CHECK(decode<Rational>(m, {}) == Q(want));
  CHECK(decode<double>(m, {}) == doctest::Approx(static_cast<double>(want)));

  DecodeTrace<Rational> tr;
  decode<Rational>(m, {}, &tr);
  REQUIRE(tr.states.size() == static_cast<size_t>(T));
  REQUIRE(tr.states[0].size() == 3 + 1u);
  // Step 2 input: o_1 + Bin(2).
  auto b1 = bin_encode(1, bits), b2 = bin_encode(2, bits);
  for (int j = 0; j < bits; ++j) CHECK(tr.states[1][0][j] == Q(b1[j] + b2[j]));
}

TEST_CASE("decode validates steps") {
  TransformerModel m = identity_model(2, 1, 0, 0);
  CHECK_THROWS_AS(decode<double>(m, {}), Error);
}

TEST_CASE("perturbed decode: zero delta and classifier shift") {
  TransformerModel m = identity_model(3, 2, 2, 3);
  long p = num_params(m, true);
  Vec<double> zero(p, 0.0);
  CHECK(decode_param_perturbed(m, {}, zero) ==
        doctest::Approx(decode<double>(m, {})));

  // theta_cls sits right after E and h0 in the flattened order; shifting its
  // first coordinate by eps adds eps * o[0].
  long cls_at = 0;
  for (const auto& lay : m.layers) {
    for (const auto* a : {&lay.dec_attn, &lay.enc_attn})
      cls_at += 2L * a->d_k * m.d + 2L * a->d_k + static_cast<long>(m.d) * m.d + m.d +
                a->d_k + m.d;
    for (const auto& f : lay.ff)
      if (!f.correction) cls_at += static_cast<long>(f.W.rows) * f.W.cols + f.W.rows;
  }
  cls_at += static_cast<long>(m.E.rows) * m.E.cols + m.d;

  Vec<double> delta(p, 0.0);
  delta[cls_at] = 0.5;
  // o[0] = sum of first position bits of 1..3 = Bin(1)[0]+Bin(2)[0]+Bin(3)[0]
  // over 2 bits = 0 + 1 + 1 = 2.
  double base = decode<double>(m, {});
  CHECK(decode_param_perturbed(m, {}, delta) == doctest::Approx(base + 0.5 * 2));
}

TEST_CASE("perturbed decode against an exact weight-editing oracle") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g(0, 0.01);
  TransformerModel m = identity_model(3, 2, 2, 2);
  long p = num_params(m, true);

  // Oracle: add the same delta into a rational copy of the model, walking the
  // documented flattening order, then run the plain float decode.
  auto edited = [&](const Vec<double>& delta) {
    TransformerModel e = m;
    long at = 0;
    auto add_sp = [&](SpMat& M) {
      SpMat out(M.rows, M.cols);
      Mat<double> dense(M.rows, M.cols);
      for (int r = 0; r < M.rows; ++r)
        for (auto& [c, v] : M.row[r]) dense.at(r, c) = v.get_d();
      for (int r = 0; r < M.rows; ++r)
        for (int c = 0; c < M.cols; ++c) {
          Rational v = rational_from_double(dense.at(r, c) + delta[at++]);
          out.set(r, c, v);
        }
      M = out;
    };
    auto add_vec = [&](Vec<Rational>& v) {
      for (auto& x : v) x += rational_from_double(delta[at++]);
    };
    auto add_attn = [&](AttentionParams& a) {
      add_sp(a.Wq);
      add_vec(a.bq);
      add_sp(a.Wk);
      add_vec(a.bk);
      add_sp(a.Wv);
      add_vec(a.bv);
      add_vec(a.k0);
      add_vec(a.v0);
    };
    for (auto& lay : e.layers) {
      add_attn(lay.dec_attn);
      add_attn(lay.enc_attn);
      for (auto& f : lay.ff)
        if (!f.correction) {
          add_sp(f.W);
          add_vec(f.b);
        }
    }
    add_sp(e.E);
    add_vec(e.h0);
    add_vec(e.theta_cls);
    for (auto& lay : e.layers)
      for (auto& f : lay.ff)
        if (f.correction) {
          add_sp(f.W);
          add_vec(f.b);
        }
    REQUIRE(at == p);
    return decode<double>(e, {});
  };

  for (int it = 0; it < 10; ++it) {
    Vec<double> delta(p);
    for (auto& d : delta) d = g(rng);
    CHECK(decode_param_perturbed(m, {}, delta) ==
          doctest::Approx(edited(delta)).epsilon(1e-9));
  }
}

TEST_CASE("encoder symbols reach the decoder through attention") {
  // One layer; the decoder query matches every encoder key (score 1 beats the
  // null's 0), so the step output picks up the average encoder value.
  const int d = 2;
  TransformerModel m = identity_model(d, 1, 0, 1);
  m.E = SpMat(d, 2);
  m.E.set(0, 0, Q(1));  // symbol 0 -> e_0
  m.E.set(1, 1, Q(1));  // symbol 1 -> e_1
  AttentionParams& a = m.layers[0].enc_attn;
  a.d_k = 1;
  a.Wq = SpMat(1, d);
  a.bq = {Q(1)};
  a.Wk = SpMat(1, d);
  a.bk = {Q(1)};
  a.Wv = sp_identity(d);
  a.bv = Vec<Rational>(d, Q(0));
  a.k0 = {Q(0)};
  a.v0 = Vec<Rational>(d, Q(0));

  // Input (0, 1): average encoder value (1/2, 1/2); theta_cls all ones -> 1.
  CHECK(decode<Rational>(m, {0, 1}) == Q(1));
  CHECK(decode<Rational>(m, {0, 0}) == Q(1));
  CHECK(decode<Rational>(m, {}) == Q(0));  // null wins when there is nothing
}

TEST_CASE("json round trip preserves exact decode") {
  TransformerModel m = identity_model(3, 2, 3, 4);
  m.layers[1].ff.push_back(ff_identity(3));
  m.layers[1].ff.back().correction = true;
  for (auto mode : {NumericMode::kRational, NumericMode::kFloat}) {
    TransformerModel m2 = transformer_from_json(transformer_to_json(m, mode));
    CHECK(m2.d == m.d);
    CHECK(m2.T_prime == m.T_prime);
    REQUIRE(m2.layers.size() == m.layers.size());
    CHECK(m2.layers[1].ff[1].correction);
    CHECK(decode<Rational>(m2, {}) == decode<Rational>(m, {}));
  }
}

TEST_CASE("parameter counting splits corrections") {
  TransformerModel m = identity_model(2, 1, 0, 1);
  long base_count = num_params(m, false);
  m.layers[0].ff.push_back(ff_identity(2));
  m.layers[0].ff.back().correction = true;
  CHECK(num_params(m, false) == base_count);
  CHECK(num_params(m, true) == base_count + 2 * 2 + 2);
}
