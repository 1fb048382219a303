#pragma once

#include <stdexcept>
#include <string>

namespace ineq {

// Input bytes or a constructed object violate a schema or model invariant.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A censoring domain, or a conditional slice of one, is provably empty.
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fatal sampler state: an invariant broke mid-chain (empty conditional,
// non-SPD scatter, non-finite draw).
struct ChainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ineq
