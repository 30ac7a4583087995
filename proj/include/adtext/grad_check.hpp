#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "adtext/autograd.hpp"

namespace adtext {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t entries_checked = 0;
};

// Records the loss on the given tape. Must be deterministic.
using LossBuilder = std::function<Var(Tape<double>&)>;

// Compares reverse-mode gradients with central differences
// (f(x+step) - f(x-step)) / 2step. Relative error per entry is
// |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|). With sample_per_tensor == 0
// every entry is checked, otherwise max(50, sample_per_tensor) entries per
// tensor drawn with `seed`. Parameter gradients are overwritten.
GradCheckResult grad_check(const LossBuilder& loss, std::span<Parameter<double>* const> params,
                           double step = 1e-5, std::size_t sample_per_tensor = 0,
                           std::uint64_t seed = 0);

}  // namespace adtext
