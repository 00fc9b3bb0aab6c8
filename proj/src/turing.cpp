#include "sma/turing.hpp"

#include <algorithm>

#include <json.hpp>

namespace sma {

using nlohmann::json;

int TMSpec::state_index(const std::string& s) const {
  auto it = std::find(states.begin(), states.end(), s);
  if (it == states.end()) fail("UnknownState", "state '" + s + "' not declared");
  return static_cast<int>(it - states.begin());
}

int TMSpec::symbol_index(const std::string& s) const {
  auto it = std::find(alphabet.begin(), alphabet.end(), s);
  if (it == alphabet.end()) fail("SymbolNotInAlphabet", "symbol '" + s + "' not in alphabet");
  return static_cast<int>(it - alphabet.begin());
}

TMSpec::Step TMSpec::step(int z, int a) const {
  if (is_terminal(z)) return Step{z, a, +1};
  auto it = delta.find({z, a});
  if (it == delta.end()) fail("PartialDelta", "no transition for (" + states[z] + ", " + alphabet[a] + ")");
  return it->second;
}

TMSpec parse_tm(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail("SchemaError", std::string("bad JSON: ") + e.what());
  }
  TMSpec m;
  try {
    m.states = j.at("states").get<std::vector<std::string>>();
    m.alphabet = j.at("alphabet").get<std::vector<std::string>>();
    std::string blank = j.at("blank").get<std::string>();
    auto bit = std::find(m.alphabet.begin(), m.alphabet.end(), blank);
    if (bit == m.alphabet.end()) fail("BlankNotInAlphabet", "blank '" + blank + "' missing from alphabet");
    m.blank = static_cast<int>(bit - m.alphabet.begin());
    m.init = m.state_index(j.at("init").get<std::string>());
    for (const auto& s : j.at("accept")) m.accept.insert(m.state_index(s.get<std::string>()));
    for (const auto& s : j.value("reject", json::array())) m.reject.insert(m.state_index(s.get<std::string>()));
    m.time_bound = j.at("time_bound").get<long>();
    for (const auto& row : j.at("delta")) {
      int z = m.state_index(row.at("state").get<std::string>());
      int a = m.symbol_index(row.at("read").get<std::string>());
      std::string mv = row.at("move").get<std::string>();
      if (mv != "L" && mv != "R") fail("SchemaError", "move must be 'L' or 'R'");
      TMSpec::Step st{m.state_index(row.at("next").get<std::string>()),
                      m.symbol_index(row.at("write").get<std::string>()), mv == "L" ? -1 : +1};
      if (m.delta.count({z, a})) fail("SchemaError", "duplicate delta row");
      m.delta[{z, a}] = st;
    }
  } catch (const json::exception& e) {
    fail("SchemaError", std::string("bad TM description: ") + e.what());
  }
  if (m.time_bound < 1) fail("SchemaError", "time_bound must be >= 1");
  for (int z : m.accept)
    if (m.reject.count(z)) fail("TerminalOverlap", "state '" + m.states[z] + "' both accepts and rejects");
  if (m.is_terminal(m.init)) fail("SchemaError", "initial state is terminal");
  for (int z = 0; z < m.num_states(); ++z) {
    if (m.is_terminal(z)) continue;
    for (int a = 0; a < m.num_symbols(); ++a)
      if (!m.delta.count({z, a}))
        fail("PartialDelta",
             "delta missing for (" + m.states[z] + ", " + m.alphabet[a] + ")");
  }
  return m;
}

std::string tm_to_json(const TMSpec& m) {
  json j;
  j["states"] = m.states;
  j["alphabet"] = m.alphabet;
  j["blank"] = m.alphabet[m.blank];
  j["init"] = m.states[m.init];
  json acc = json::array(), rej = json::array();
  for (int z : m.accept) acc.push_back(m.states[z]);
  for (int z : m.reject) rej.push_back(m.states[z]);
  j["accept"] = acc;
  j["reject"] = rej;
  j["time_bound"] = m.time_bound;
  json rows = json::array();
  for (const auto& [key, st] : m.delta) {
    rows.push_back({{"state", m.states[key.first]},
                    {"read", m.alphabet[key.second]},
                    {"next", m.states[st.next_state]},
                    {"write", m.alphabet[st.write]},
                    {"move", st.move < 0 ? "L" : "R"}});
  }
  j["delta"] = rows;
  return j.dump(2);
}

TMTrace simulate(const TMSpec& m, const std::vector<int>& input, long start_loc) {
  for (int a : input) {
    if (a < 0 || a >= m.num_symbols()) fail("SymbolNotInAlphabet", "input symbol index out of range");
    if (a == m.blank) fail("SymbolNotInAlphabet", "input may not contain the blank symbol");
  }
  long T = m.time_bound;
  long n = static_cast<long>(input.size());
  // Tape: input at cells 1..n regardless of start_loc; everything else blank.
  std::map<long, int> tape;
  for (long i = 0; i < n; ++i) tape[i + 1] = input[i];
  auto read = [&](long cell) {
    auto it = tape.find(cell);
    return it == tape.end() ? m.blank : it->second;
  };

  TMTrace tr;
  tr.T = T;
  long loc = start_loc;
  int z = m.init;
  tr.state.push_back(z);
  tr.loc.push_back(loc);
  tr.sym.push_back(read(loc));
  for (long i = 1; i <= T; ++i) {
    int a = read(loc);
    TMSpec::Step st = m.step(z, a);
    tape[loc] = st.write;
    z = st.next_state;
    loc += st.move;
    if (loc < start_loc && loc < 1)
      fail("LeftEdgeViolation", "head moved left of the tape start at step " + std::to_string(i));
    tr.written.push_back(st.write);
    tr.move.push_back(st.move);
    tr.state.push_back(z);
    tr.loc.push_back(loc);
    tr.sym.push_back(read(loc));
    if (!tr.halted_at && m.is_terminal(z)) tr.halted_at = i;
  }
  return tr;
}

TMTrace simulate(const TMSpec& m, const std::vector<std::string>& input) {
  std::vector<int> idx;
  idx.reserve(input.size());
  for (const auto& s : input) idx.push_back(m.symbol_index(s));
  return simulate(m, idx);
}

long last_writer(const TMTrace& tr, long i) {
  for (long t = i; t >= 1; --t)
    if (tr.loc[t - 1] == tr.loc[i]) return t;
  return 0;
}

int decision(const TMSpec& m, const TMTrace& tr) {
  return m.accept.count(tr.state.back()) ? 1 : 0;
}

}  // namespace sma
