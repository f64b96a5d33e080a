#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unp/mlp.hpp"

namespace unp {

struct GradCheckCase {
  std::string name;
  GradCheckResult result;
  double tolerance;
  bool passed() const { return result.max_relative_error < tolerance; }
};

/// Finite-difference checks on every shipped architecture plus a linear and
/// a tanh reference net, `probes` parameters each.
std::vector<GradCheckCase> gradcheck_suite(std::uint64_t seed, int probes = 100);

}  // namespace unp
