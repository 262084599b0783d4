#pragma once

#include <cstdint>
#include <ostream>

namespace opposd {

// Numerical-hygiene battery: finite-difference agreement (relative error
// <= 1e-4 at randomized parameter points) for every analytic gradient in the
// project (network heads, entropy, critic loss, both ratio losses, the actor
// objective), plus the softmax/softplus stability invariants. Prints one
// line per check; returns the number of failures.
int run_invariant_suite(std::uint64_t seed, std::ostream& os);

}  // namespace opposd
