#pragma once

// Exact rational arithmetic used throughout the core. No floating point is
// allowed anywhere on the solver path; doubles appear only in statistics
// reporting (confidence intervals).

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dstq {

using Rational = mpq_class;

inline Rational rat(long num, long den = 1) {
  if (den == 0) throw std::invalid_argument("rational with zero denominator");
  Rational r(num, den);
  r.canonicalize();
  return r;
}

// Accepts "n" or "n/d", optionally signed. Throws std::invalid_argument on
// malformed input or zero denominator.
inline Rational parse_rational(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("empty rational");
  auto slash = s.find('/');
  try {
    Rational r;
    if (slash == std::string::npos) {
      r = Rational(mpz_class(s));
    } else {
      mpz_class num(s.substr(0, slash));
      mpz_class den(s.substr(slash + 1));
      if (den == 0) throw std::invalid_argument("zero denominator: " + s);
      r = Rational(num) / Rational(den);
    }
    r.canonicalize();
    return r;
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad rational: " + s);
  }
}

// Canonical form: "n" when the denominator is 1, else "n/d".
inline std::string format_rational(const Rational& r) {
  Rational c = r;
  c.canonicalize();
  if (c.get_den() == 1) return c.get_num().get_str();
  return c.get_num().get_str() + "/" + c.get_den().get_str();
}

// The dyadic rational u / 2^64, used to turn one 64-bit PRNG draw into an
// exact uniform sample of [0,1).
inline Rational dyadic_from_u64(std::uint64_t u) {
  mpz_class num;
  mpz_import(num.get_mpz_t(), 1, 1, sizeof(u), 0, 0, &u);
  mpz_class den = 1;
  den <<= 64;
  Rational r(num, den);
  r.canonicalize();
  return r;
}

}  // namespace dstq
