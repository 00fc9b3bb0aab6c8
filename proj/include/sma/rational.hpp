#pragma once

#include <gmpxx.h>

#include <string>

#include "sma/error.hpp"

namespace sma {

// Exact arithmetic scalar. Closed under +, *, max(.,0), which is all the
// layered-net and transformer evaluators need.
using Rational = mpq_class;

enum class NumericMode { kRational, kFloat };

inline double to_double(const Rational& q) { return q.get_d(); }

// Doubles are dyadic rationals; the conversion is exact.
inline Rational rational_from_double(double x) {
  Rational q(x);
  q.canonicalize();
  return q;
}

// Accepts "n", "-n", "n/d".
inline Rational rational_from_string(const std::string& s) {
  Rational q;
  if (q.set_str(s, 10) != 0) fail("BadNumber", "cannot parse rational '" + s + "'");
  if (q.get_den() == 0) fail("BadNumber", "zero denominator in '" + s + "'");
  q.canonicalize();
  return q;
}

inline std::string rational_to_string(const Rational& q) { return q.get_str(); }

template <typename T>
T relu(const T& x) {
  return x > T(0) ? x : T(0);
}

// Conversion helpers used by the dual-mode evaluators.
template <typename T>
T scalar_cast(const Rational& q);

template <>
inline Rational scalar_cast<Rational>(const Rational& q) {
  return q;
}

template <>
inline double scalar_cast<double>(const Rational& q) {
  return q.get_d();
}

}  // namespace sma
