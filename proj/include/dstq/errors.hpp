#pragma once

#include <stdexcept>
#include <string>

namespace dstq {

// Error categories map one-to-one onto CLI exit codes; see tools/dstq.cpp.
enum class Errc {
  parse,        // malformed input file
  infeasible,   // instance has no feasible solution
  caps,         // a configured resource cap would be exceeded (never silent)
  retry,        // repetition budget exhausted without full coverage
  validation,   // internal invariant or precondition violated
  unsupported,  // operation outside the supported regime
};

class Error : public std::runtime_error {
 public:
  Error(Errc kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Errc kind() const { return kind_; }

 private:
  Errc kind_;
};

[[noreturn]] inline void fail(Errc kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool ok, Errc kind, const std::string& what) {
  if (!ok) fail(kind, what);
}

}  // namespace dstq
