// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "gdu/bptt.hpp"

namespace gdu::harness {

// One full backward pass with the norm recorder attached.
NormProbe probe_norms(const Model& model, const Batch& batch);

// ||eps_1|| / ||eps_T||: how much of the final error signal survives the
// trip back to the first step.
double norm_ratio(const NormProbe& probe);

// CSV schema: t,norm,normalized   (normalized = norm / max over t)
void write_norm_csv(const std::string& path, const NormProbe& probe);

// Keep-gate activations over one sequence (batch row 0): K x T, beta for the
// coupled kinds, the forget gate for lstm. With `beta` false the overwrite
// gate alpha (input gate for lstm) is emitted instead.
Matrix gate_activations(const Model& model, const std::vector<Matrix>& inputs,
                        bool beta = true);

// CSV schema: unit,t0,...,t{T-1}; one row per state unit.
void write_gate_csv(const std::string& path, const Matrix& activations);

}  // namespace gdu::harness
