#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "biresnet/errors.hpp"

namespace biresnet {

// One differentiable term of a check: a block of 64-bit values the loss
// depends on, paired with a snapshot of the analytic gradient.
struct GradCheckTerm {
  std::string name;
  double* values = nullptr;
  const double* analytic = nullptr;
  std::size_t size = 0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_term;
  std::size_t worst_index = 0;
};

// Central finite differences against analytic gradients.
// rel_err = |analytic - numeric| / max(denom_floor, |analytic| + |numeric|),
// maximized over every element of every term. The floor turns the relative
// tolerance into an absolute one for near-zero gradients, where the central
// difference itself only carries ~eps*|loss|/h of precision; raise it when
// the loss saturates (e.g. softmax probabilities pinned near 0 or 1).
inline GradCheckReport finite_diff_check(
    const std::function<double()>& loss_fn,
    const std::vector<GradCheckTerm>& terms, double h = 1e-5,
    double denom_floor = 1e-8) {
  GradCheckReport report;
  for (const auto& term : terms) {
    for (std::size_t i = 0; i < term.size; ++i) {
      const double saved = term.values[i];
      term.values[i] = saved + h;
      const double up = loss_fn();
      term.values[i] = saved - h;
      const double down = loss_fn();
      term.values[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericalError("non-finite loss while perturbing '" + term.name +
                             "'");
      }
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = term.analytic[i];
      if (!std::isfinite(analytic)) {
        throw NumericalError("non-finite analytic gradient in '" + term.name +
                             "'");
      }
      const double denom =
          std::max(denom_floor, std::abs(analytic) + std::abs(numeric));
      const double rel = std::abs(analytic - numeric) / denom;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_term = term.name;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace biresnet
