#include "adtext/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "adtext/random.hpp"

namespace adtext {

namespace {

double evaluate(const LossBuilder& loss, const std::string& name) {
  try {
    Tape<double> tape(false);
    const double v = tape.value(loss(tape))[0];
    if (!std::isfinite(v)) throw NumericError("non-finite loss while perturbing " + name);
    return v;
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " (parameter " + name + ")");
  }
}

}  // namespace

GradCheckResult grad_check(const LossBuilder& loss, std::span<Parameter<double>* const> params,
                           double step, std::size_t sample_per_tensor, std::uint64_t seed) {
  if (!(step > 0.0)) throw ConfigError("grad_check step must be positive");

  for (auto* p : params) {
    if (!p->value.all_finite()) throw NumericError("non-finite value in parameter " + p->name);
    p->grad = Tensor<double>(p->value.shape());
  }
  {
    Tape<double> tape;
    Var l = loss(tape);
    if (!std::isfinite(tape.value(l)[0])) throw NumericError("non-finite loss at the base point");
    tape.backward(l);
  }

  GradCheckResult result;
  Rng rng(seed);
  for (auto* p : params) {
    if (!p->grad.all_finite()) throw NumericError("non-finite gradient in parameter " + p->name);
    std::vector<std::size_t> entries(p->value.size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (sample_per_tensor > 0) {
      const std::size_t n = std::min(entries.size(), std::max<std::size_t>(50, sample_per_tensor));
      rng.shuffle(std::span<std::size_t>(entries));
      entries.resize(n);
      std::sort(entries.begin(), entries.end());
    }
    for (std::size_t i : entries) {
      const double original = p->value[i];
      p->value[i] = original + step;
      const double up = evaluate(loss, p->name);
      p->value[i] = original - step;
      const double down = evaluate(loss, p->name);
      p->value[i] = original;

      const double fd = (up - down) / (2.0 * step);
      const double ad = p->grad[i];
      const double rel = std::abs(ad - fd) / std::max(1e-8, std::abs(ad) + std::abs(fd));
      ++result.entries_checked;
      if (rel > result.max_rel_error || result.worst_parameter.empty()) {
        result.max_rel_error = rel;
        result.worst_parameter = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace adtext
