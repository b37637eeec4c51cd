#pragma once

#include <cstdint>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

namespace odyssey {

// Cardinalities and costs are exact rationals; they are only rounded when
// printed so golden files do not depend on floating point behaviour.
using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline BigInt round_half_up(const Rational& r) {
  BigInt num = boost::multiprecision::numerator(r);
  BigInt den = boost::multiprecision::denominator(r);
  // floor((2n + d) / 2d) for d > 0
  BigInt twice = 2 * num + den;
  BigInt q = twice / (2 * den);
  if (twice < 0 && q * 2 * den != twice) --q;
  return q;
}

inline std::string to_display(const Rational& r) { return round_half_up(r).str(); }

inline std::string to_exact_string(const Rational& r) { return r.str(); }

inline Rational rational_from_string(const std::string& s) { return Rational(s); }

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

}  // namespace odyssey
