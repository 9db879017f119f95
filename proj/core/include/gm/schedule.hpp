#pragma once

#include <string>

namespace gm {

// Interpolation schedule kappa_t on [0,1] with kappa(0)=0, kappa(1)=1 and
// kappa nondecreasing. The geometric-average coefficients are the fixed pair
// alpha_t = kappa(t), sigma_t = 1 - kappa(t).
//
// kappa_dot may vanish on interior intervals (e.g. flat spots of a custom
// polynomial); mixture jump intensities are zero there.
enum class ScheduleKind { Linear, Polynomial, Cosine };

struct Schedule {
  ScheduleKind kind = ScheduleKind::Linear;
  double power = 1.0;  // Polynomial only, > 0

  static Schedule linear() { return {ScheduleKind::Linear, 1.0}; }
  static Schedule polynomial(double p);
  // kappa(t) = sin^2(pi t / 2). An extension beyond the linear/polynomial
  // family, included because image-generation practice uses it.
  static Schedule cosine() { return {ScheduleKind::Cosine, 1.0}; }

  // "linear" | "poly:<p>" | "cosine"
  static Schedule parse(const std::string& name);
  std::string name() const;
};

struct ScheduleEval {
  double kappa = 0.0;
  double kappa_dot = 0.0;
};

// Exact analytic kappa and its derivative. Throws DomainError outside [0,1].
ScheduleEval eval_schedule(const Schedule& s, double t);

}  // namespace gm
