#include <doctest.h>

#include <fstream>
#include <sstream>

#include "sma/tm_compiler.hpp"

using namespace sma;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string data_dir() {
  const char* d = std::getenv("SMA_DATA_DIR");
  return d ? d : "data";
}

TMSpec parity() { return parse_tm(slurp(data_dir() + "/parity.json")); }

}  // namespace

TEST_CASE("layout covers the width with disjoint groups") {
  CoordinateLayout lo = make_layout(5, 3, 6);
  std::vector<Group> gs = {lo.st,   lo.sym1, lo.sym2, lo.pos1, lo.pos2, lo.pos3,
                           lo.scr1, lo.scr2, lo.scr3, lo.scr4, lo.scrt};
  int covered = 0;
  for (const auto& g : gs) covered += g.width;
  CHECK(covered == lo.d_tm);
  // Sequential, non-overlapping placement.
  int at = 0;
  for (const auto& g : gs) {
    CHECK(g.offset == at);
    at += g.width;
  }
  CHECK(lo.st.width == 5);
  CHECK(lo.sym1.width == 3);
  CHECK(lo.pos1.width == 6);
  CHECK(lo.scr4.width == 3);
  CHECK(lo.scrt.width == std::max(5 * 3, std::max(6, 3)));
}

TEST_CASE("augmentation adds a pre-init state and a step") {
  TMSpec m = parity();
  TMSpec aug = augment_tm(m);
  CHECK(aug.num_states() == m.num_states() + 1);
  // Original indices preserved; the pre state is appended last.
  for (int z = 0; z < m.num_states(); ++z) CHECK(aug.states[z] == m.states[z]);
  int pre = m.num_states();
  CHECK(aug.init == pre);
  CHECK(aug.time_bound == m.time_bound + 1);
  // The pre state writes blank and steps right into the old start.
  for (int a = 0; a < aug.num_symbols(); ++a) {
    auto s = aug.step(pre, a);
    CHECK(s.next_state == m.init);
    CHECK(s.write == m.blank);
    CHECK(s.move == 1);
  }
  // Terminal self-loops are materialized rows, so delta is total.
  for (int z = 0; z < aug.num_states(); ++z)
    for (int a = 0; a < aug.num_symbols(); ++a) {
      auto s = aug.step(z, a);
      if (aug.is_terminal(z)) {
        CHECK(s.next_state == z);
        CHECK(s.write == a);
        CHECK(s.move == 1);
      }
    }
  // Augmented run from cell 0 reproduces the plain run shifted by one step.
  std::vector<int> in = {m.symbol_index("1"), m.symbol_index("0"), m.symbol_index("1")};
  TMTrace plain = simulate(m, in);
  TMTrace shifted = simulate(aug, in, 0);
  CHECK(shifted.T == plain.T + 1);
  for (long t = 0; t <= plain.T; ++t) {
    CHECK(shifted.state[t + 1] == plain.state[t]);
    CHECK(shifted.loc[t + 1] == plain.loc[t]);
  }
}

TEST_CASE("compiled model dimensions") {
  CompiledTransformer ct = compile_tm(parity());
  CHECK(ct.model.d == ct.layout.d_tm);
  CHECK(ct.model.num_layers() == ct.layout.d_pos + 14);
  CHECK(ct.model.T_prime == ct.aug.time_bound);
  CHECK((1L << ct.layout.d_pos) >= ct.aug.time_bound + 1);
  // Each layer carries the round-correction tail in ff slots 2 and 3.
  for (const auto& lay : ct.model.layers) {
    REQUIRE(lay.ff.size() == 3);
    CHECK_FALSE(lay.ff[0].correction);
    CHECK(lay.ff[1].correction);
    CHECK(lay.ff[2].correction);
  }
}

TEST_CASE("verify parity exhaustively to length 3") {
  CompiledTransformer ct = compile_tm(parity());
  for (int len = 0; len <= 3; ++len)
    for (unsigned v = 0; v < (1u << len); ++v) {
      std::vector<int> in;
      for (int i = 0; i < len; ++i) in.push_back((v >> i) & 1);
      TMVerifyReport rep = verify_tm(ct, in);
      INFO("len=" << len << " v=" << v << " detail=" << rep.detail);
      REQUIRE(rep.pass);
      REQUIRE(rep.min_gap.has_value());
      CHECK(*rep.min_gap >= 1.0 - 1e-9);
    }
}

TEST_CASE("decode agrees between rational and float") {
  CompiledTransformer ct = compile_tm(parity());
  for (auto in : std::vector<std::vector<int>>{{}, {1}, {0, 1}, {1, 1, 0}}) {
    Rational q = decode<Rational>(ct.model, in);
    double f = decode<double>(ct.model, in);
    CHECK(f == doctest::Approx(q.get_d()).epsilon(1e-9));
    // Exact mode output is a hard +-1.
    CHECK((q == Rational(1) || q == Rational(-1)));
  }
}

TEST_CASE("prediction tracks the machine decision") {
  TMSpec m = parity();
  CompiledTransformer ct = compile_tm(m);
  for (auto in : std::vector<std::vector<int>>{{}, {0}, {1}, {1, 1}, {1, 0, 1}}) {
    TMTrace tr = simulate(m, in);
    CHECK(decode<Rational>(ct.model, in) == Rational(2 * decision(m, tr) - 1));
  }
}

TEST_CASE("time bound must fit the position code") {
  TMSpec m = parity();
  m.time_bound = 0;
  CHECK_THROWS_AS(compile_tm(m), Error);
}

TEST_CASE("width padding leaves the live prefix intact") {
  TMSpec m = parity();
  CompiledTransformer base = compile_tm(m);
  TMCompileOptions o;
  o.target_width = base.layout.d_tm + 7;
  CompiledTransformer wide = compile_tm(m, o);
  CHECK(wide.model.d == base.layout.d_tm + 7);
  for (auto in : std::vector<std::vector<int>>{{}, {1, 0}}) {
    CHECK(decode<Rational>(wide.model, in) == decode<Rational>(base.model, in));
    CHECK(verify_tm(wide, in).pass);
  }
}

TEST_CASE("compiled model survives a json round trip") {
  CompiledTransformer ct = compile_tm(parity());
  TransformerModel m2 = transformer_from_json(transformer_to_json(ct.model, NumericMode::kRational));
  for (auto in : std::vector<std::vector<int>>{{}, {1}, {0, 1}})
    CHECK(decode<Rational>(m2, in) == decode<Rational>(ct.model, in));
}

TEST_CASE("palindrome spot checks") {
  TMSpec m = parse_tm(slurp(data_dir() + "/palindrome.json"));
  CompiledTransformer ct = compile_tm(m);
  for (auto in : std::vector<std::vector<int>>{{}, {0}, {0, 1}, {1, 0, 1}}) {
    TMVerifyReport rep = verify_tm(ct, in);
    INFO(rep.detail);
    REQUIRE(rep.pass);
  }
}
