#include <doctest.h>

#include <random>

#include "sma/error.hpp"
#include "sma/ffnet.hpp"

using namespace sma;

namespace {

Rational Q(long n, long d = 1) { return Rational(n, d); }

Sublayer linrelu(Mat<Rational> W, Vec<Rational> b) {
  Sublayer s;
  s.kind = SublayerKind::kLinReLU;
  s.W = std::move(W);
  s.b = std::move(b);
  return s;
}

Sublayer round_layer(int dim, int active) {
  Sublayer s;
  s.kind = SublayerKind::kRound;
  s.round_dim = dim;
  s.round_active = active;
  return s;
}

// y = prod of d ones scaled through identity chain, head z - 1/2 (kLin).
// With all weights 1 this is the usual deep product toy.
Net product_net(int depth, bool corrected) {
  Net n;
  n.input_dim = 1;
  for (int i = 0; i < depth - 1; ++i) {
    Mat<Rational> W(1, 1);
    W.at(0, 0) = 1;
    n.sublayers.push_back(linrelu(W, {Q(0)}));
    if (corrected) n.sublayers.push_back(round_layer(1, 1));
  }
  Mat<Rational> W(1, 1);
  W.at(0, 0) = 1;
  Sublayer head = linrelu(W, {Q(-1, 2)});
  head.kind = SublayerKind::kLin;
  n.sublayers.push_back(head);
  n.meta = "{}";
  return n;
}

}  // namespace

TEST_CASE("round gadget fixed points") {
  Net n;
  n.input_dim = 1;
  n.sublayers.push_back(round_layer(1, 1));
  n.meta = "{}";
  auto r = [&](Rational z) { return forward<Rational>(n, {z})[0]; };
  CHECK(r(Q(0)) == Q(0));
  CHECK(r(Q(1)) == Q(1));
  CHECK(r(Q(1, 3)) == Q(0));   // boundary pins to 0
  CHECK(r(Q(2, 3)) == Q(1));   // boundary pins to 1
  CHECK(r(Q(1, 2)) == Q(1, 2));  // midpoint is the fixed ramp center
  CHECK(r(Q(9, 10)) == Q(1));
  CHECK(r(Q(1, 5)) == Q(0));
  CHECK(r(Q(-3)) == Q(0));
  CHECK(r(Q(7, 2)) == Q(1));
}

TEST_CASE("round gadget materialization is two correction sublayers") {
  Net n;
  n.input_dim = 2;
  n.sublayers.push_back(round_layer(2, 1));
  Net m = materialize_rounds(n);
  REQUIRE(m.sublayers.size() == 2);
  CHECK(m.sublayers[0].kind == SublayerKind::kLinReLU);
  CHECK(m.sublayers[0].correction);
  CHECK(m.sublayers[1].correction);
  CHECK(m.sublayers[0].W.rows == 4);
  CHECK(m.sublayers[1].W.rows == 2);
  // Inactive coordinate maps to 0, not identity.
  auto y = forward<Rational>(n, {Q(1), Q(1, 2)});
  CHECK(y[0] == Q(1));
  CHECK(y[1] == Q(0));
  // Materialized net computes the same thing.
  auto ym = forward<Rational>(m, {Q(1), Q(1, 2)});
  CHECK(ym == y);
}

TEST_CASE("product net forward") {
  Net n = product_net(16, false);
  CHECK(forward<Rational>(n, {Q(1)})[0] == Q(1, 2));
  CHECK(forward<double>(n, {1.0})[0] == doctest::Approx(0.5));
  Net c = product_net(16, true);
  CHECK(forward<Rational>(c, {Q(1)})[0] == Q(1, 2));
}

TEST_CASE("forward records post-sublayer activations") {
  Net n = product_net(3, false);
  std::vector<Vec<Rational>> rec;
  forward<Rational>(n, {Q(1)}, &rec);
  REQUIRE(rec.size() == 3);
  CHECK(rec[0][0] == Q(1));
  CHECK(rec[2][0] == Q(1, 2));
}

TEST_CASE("num_params and flatten round trip") {
  Net n = product_net(4, true);
  long p = num_params(n, false);
  CHECK(p == 4 * 2);  // each of 4 sublayers: 1 weight + 1 bias
  Net m = materialize_rounds(n);
  long p_all = num_params(m, true);
  CHECK(p_all > p);

  auto theta = flatten(m, true);
  CHECK(static_cast<long>(theta.size()) == p_all);
  Net m2 = m;
  unflatten(m2, theta, true);
  CHECK(forward<Rational>(m2, {Q(1)})[0] == forward<Rational>(m, {Q(1)})[0]);

  // Unflattening correction params into a net with unexpanded rounds fails.
  Net raw = product_net(4, true);
  std::string code;
  try {
    unflatten(raw, theta, true);
  } catch (const Error& e) {
    code = e.code();
  }
  CHECK(code == "RoundNotMaterialized");
}

TEST_CASE("l1 norm counts trainable parameters only") {
  Net n = product_net(3, true);
  // 3 trainable sublayers: weights 1,1,1 and biases 0,0,-1/2.
  CHECK(l1_norm(n) == Q(7, 2));
  CHECK(l1_norm(materialize_rounds(n)) == Q(7, 2));
}

TEST_CASE("perturbed forward against a weight-editing oracle") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0, 0.05);
  Net n = product_net(5, true);
  Net m = materialize_rounds(n);
  long p = num_params(m, true);

  for (int it = 0; it < 20; ++it) {
    Vec<double> delta(p);
    for (auto& d : delta) d = g(rng);
    double x = std::uniform_real_distribution<double>(0, 1)(rng);

    // Oracle: bake delta into an exact copy and run the plain forward.
    auto theta = flatten(m, true);
    for (long i = 0; i < p; ++i) theta[i] += rational_from_double(delta[i]);
    Net edited = m;
    unflatten(edited, theta, true);
    double want = forward<double>(edited, {x})[0];

    double got = forward_param_perturbed(n, {x}, delta)[0];
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("zero parameter perturbation is the plain forward") {
  Net n = product_net(6, true);
  Vec<double> zero(num_params(materialize_rounds(n), true), 0.0);
  CHECK(forward_param_perturbed(n, {1.0}, zero)[0] == doctest::Approx(0.5));
}

TEST_CASE("layer perturbation semantics") {
  // Single kLin sublayer y = 2x - 1; a layer delta is scaled by max(||x||, 1).
  Net n;
  n.input_dim = 1;
  Mat<Rational> W(1, 1);
  W.at(0, 0) = 2;
  Sublayer s = linrelu(W, {Q(-1)});
  s.kind = SublayerKind::kLin;
  n.sublayers.push_back(s);
  n.meta = "{}";

  CHECK(forward_layer_perturbed(n, {3.0}, {{0.25}})[0] == doctest::Approx(5 + 0.25 * 3));
  CHECK(forward_layer_perturbed(n, {0.5}, {{0.25}})[0] == doctest::Approx(0 + 0.25 * 1));
}

TEST_CASE("json round trip, both modes") {
  Net n = product_net(4, true);
  for (auto mode : {NumericMode::kRational, NumericMode::kFloat}) {
    Net n2 = net_from_json(net_to_json(n, mode));
    CHECK(n2.input_dim == n.input_dim);
    REQUIRE(n2.sublayers.size() == n.sublayers.size());
    CHECK(n2.sublayers[1].kind == SublayerKind::kRound);
    CHECK(forward<double>(n2, {1.0})[0] == doctest::Approx(0.5));
  }
  // Rational mode is exact.
  Net n3 = net_from_json(net_to_json(n, NumericMode::kRational));
  CHECK(forward<Rational>(n3, {Q(1)})[0] == Q(1, 2));
}

TEST_CASE("rational and float evaluation agree away from kinks") {
  std::mt19937_64 rng(7);
  Net n = product_net(8, true);
  for (int it = 0; it < 50; ++it) {
    double x = std::uniform_real_distribution<double>(-1, 2)(rng);
    double f = forward<double>(n, {x})[0];
    double q = forward<Rational>(n, {rational_from_double(x)})[0].get_d();
    CHECK(f == doctest::Approx(q).epsilon(1e-9));
  }
}

TEST_CASE("shape validation") {
  Net n;
  n.input_dim = 2;
  Mat<Rational> W(1, 3);  // wrong in_dim
  n.sublayers.push_back(linrelu(W, {Q(0)}));
  CHECK_THROWS_AS(n.check_shapes(), Error);
}
