// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "gdu/bptt.hpp"

namespace gdu::harness {

struct GradCheckSummary {
  CellKind kind = CellKind::srn;
  std::size_t instances = 0;
  double max_rel_err = 0.0;
  std::string worst;
};

// Randomized instances (fresh params, inputs, targets and a random initial
// state each time) checked against central finite differences. Loss kinds
// rotate across instances; gdu instances alternate between the two delta
// branches (all deltas <= 1 vs a group with delta > 1).
GradCheckSummary grad_check_kind(CellKind kind, std::size_t instances,
                                 std::size_t t_len, std::size_t state_size,
                                 std::size_t input_size, std::uint64_t seed,
                                 double eps = 1e-5);

}  // namespace gdu::harness
