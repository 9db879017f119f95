#pragma once

#include <cstddef>
#include <vector>

#include "gm/errors.hpp"

namespace gm {

// A point in a product state space: Euclidean coordinates followed by
// discrete tokens. Either block may be empty.
struct State {
  std::vector<double> real;
  std::vector<int> tok;

  bool operator==(const State&) const = default;
};

struct StateSignature {
  std::size_t real_dim = 0;
  std::vector<int> vocabs;  // one vocabulary size per discrete dimension

  std::size_t tok_dim() const { return vocabs.size(); }
  bool operator==(const StateSignature&) const = default;
};

inline bool matches(const StateSignature& sig, const State& x) {
  if (x.real.size() != sig.real_dim) return false;
  if (x.tok.size() != sig.vocabs.size()) return false;
  for (std::size_t i = 0; i < x.tok.size(); ++i)
    if (x.tok[i] < 0 || x.tok[i] >= sig.vocabs[i]) return false;
  return true;
}

inline void require_match(const StateSignature& sig, const State& x,
                          const char* what) {
  if (!matches(sig, x)) throw ShapeError(std::string(what) + ": state does not match signature");
}

}  // namespace gm
