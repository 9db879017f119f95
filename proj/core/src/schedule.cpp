#include "gm/schedule.hpp"

#include <cmath>

#include "gm/errors.hpp"

namespace gm {

Schedule Schedule::polynomial(double p) {
  if (!(p > 0.0)) throw DomainError("polynomial schedule needs power > 0");
  return {ScheduleKind::Polynomial, p};
}

Schedule Schedule::parse(const std::string& name) {
  if (name == "linear") return linear();
  if (name == "cosine") return cosine();
  if (name.rfind("poly:", 0) == 0) {
    const std::string arg = name.substr(5);
    std::size_t pos = 0;
    double p = 0.0;
    try {
      p = std::stod(arg, &pos);
    } catch (const std::exception&) {
      throw ConfigError("bad schedule spec: " + name);
    }
    if (pos != arg.size()) throw ConfigError("bad schedule spec: " + name);
    return polynomial(p);
  }
  throw ConfigError("unknown schedule: " + name);
}

std::string Schedule::name() const {
  switch (kind) {
    case ScheduleKind::Linear:
      return "linear";
    case ScheduleKind::Cosine:
      return "cosine";
    case ScheduleKind::Polynomial:
      return "poly:" + std::to_string(power);
  }
  return "linear";
}

ScheduleEval eval_schedule(const Schedule& s, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("schedule time outside [0,1]");
  switch (s.kind) {
    case ScheduleKind::Linear:
      return {t, 1.0};
    case ScheduleKind::Polynomial: {
      const double p = s.power;
      if (t == 0.0) return {0.0, p == 1.0 ? 1.0 : (p > 1.0 ? 0.0 : HUGE_VAL)};
      return {std::pow(t, p), p * std::pow(t, p - 1.0)};
    }
    case ScheduleKind::Cosine: {
      const double sp = std::sin(1.5707963267948966 * t);
      return {sp * sp, 1.5707963267948966 * std::sin(3.141592653589793 * t)};
    }
  }
  throw DomainError("unreachable schedule kind");
}

}  // namespace gm
