#include "stlab/nonlinearity.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace stlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_param(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

// chi'(u) = 5u^4 on [0,1], 10 - 5(u-2)^4 on [1,3], 5(u-4)^4 on [3,4], 0 beyond.
double cutoff_chi(double u) {
  if (u <= 0.0) return 0.0;
  if (u <= 1.0) return std::pow(u, 5);
  if (u <= 3.0) return 10.0 * (u - 1.0) - std::pow(u - 2.0, 5);
  if (u <= 4.0) return 20.0 + std::pow(u - 4.0, 5);
  return 20.0;
}

double cutoff_dchi(double u) {
  if (u <= 0.0) return 0.0;
  if (u <= 1.0) return 5.0 * std::pow(u, 4);
  if (u <= 3.0) return 10.0 - 5.0 * std::pow(u - 2.0, 4);
  if (u <= 4.0) return 5.0 * std::pow(u - 4.0, 4);
  return 0.0;
}

double cutoff_d2chi(double u) {
  if (u <= 0.0) return 0.0;
  if (u <= 1.0) return 20.0 * std::pow(u, 3);
  if (u <= 3.0) return -20.0 * std::pow(u - 2.0, 3);
  if (u <= 4.0) return 20.0 * std::pow(u - 4.0, 3);
  return 0.0;
}

double sobolev_exponent(int dim) {
  if (dim <= 2) throw std::invalid_argument("critical Sobolev exponent needs N >= 3");
  return (dim + 2.0) / (dim - 2.0);
}

Nonlinearity Nonlinearity::power_exp(double p, double q) {
  if (!(p > 1.0)) throw std::invalid_argument("power-exp needs p > 1");
  if (!(q > 1.0)) throw std::invalid_argument("power-exp needs q > 1");
  Nonlinearity n;
  n.family_ = Family::PowerExp;
  n.p_ = p;
  n.q_ = q;
  // g'' = (q(q-1)u^q - p) / u^2 changes sign at u^q = p / (q(q-1)).
  n.tail_ = {TailKind::LogConvex, 0.0, std::pow(p / (q * (q - 1.0)), 1.0 / q)};
  return n;
}

Nonlinearity Nonlinearity::cutoff_exp(double a) {
  if (!(a > 0.0)) throw std::invalid_argument("cutoff-exp needs a > 0");
  Nonlinearity n;
  n.family_ = Family::CutoffExp;
  n.a_ = a;
  n.p_ = 5.0;
  n.tail_ = {TailKind::LogConvex, 0.0, 4.0};
  return n;
}

Nonlinearity Nonlinearity::pure_power(double p) {
  if (!(p > 1.0)) throw std::invalid_argument("pure-power needs p > 1");
  Nonlinearity n;
  n.family_ = Family::PurePower;
  n.p_ = p;
  n.tail_ = {TailKind::PowerLaw, p, 0.0};
  return n;
}

Nonlinearity Nonlinearity::custom(std::string name, CustomFunctions fns, TailGrowth tail) {
  if (!fns.f || !fns.df || !fns.d2f) {
    throw std::invalid_argument("custom nonlinearity needs f, f' and f''");
  }
  Nonlinearity n;
  n.family_ = Family::Custom;
  n.name_ = std::move(name);
  n.custom_ = std::move(fns);
  n.tail_ = tail;
  return n;
}

double Nonlinearity::f(double u) const {
  if (u < 0.0) return 0.0;
  if (u == 0.0) return family_ == Family::Custom ? custom_.f(0.0) : 0.0;
  switch (family_) {
    case Family::PowerExp:
      return std::exp(g(u));
    case Family::CutoffExp:
      return cutoff_chi(u) * std::exp(a_ * u);
    case Family::PurePower:
      return std::pow(u, p_);
    case Family::Custom:
      return custom_.f(u);
  }
  return 0.0;
}

double Nonlinearity::df(double u) const {
  if (u < 0.0) return 0.0;
  if (u == 0.0) return family_ == Family::Custom ? custom_.df(0.0) : 0.0;
  switch (family_) {
    case Family::PowerExp:
      return dg(u) * f(u);
    case Family::CutoffExp:
      return (cutoff_dchi(u) + a_ * cutoff_chi(u)) * std::exp(a_ * u);
    case Family::PurePower:
      return p_ * std::pow(u, p_ - 1.0);
    case Family::Custom:
      return custom_.df(u);
  }
  return 0.0;
}

double Nonlinearity::d2f(double u) const {
  if (u < 0.0) return 0.0;
  if (u == 0.0) return family_ == Family::Custom ? custom_.d2f(0.0) : 0.0;
  switch (family_) {
    case Family::PowerExp: {
      const double gp = dg(u);
      return (d2g(u) + gp * gp) * f(u);
    }
    case Family::CutoffExp:
      return (cutoff_d2chi(u) + 2.0 * a_ * cutoff_dchi(u) + a_ * a_ * cutoff_chi(u)) *
             std::exp(a_ * u);
    case Family::PurePower:
      return p_ * (p_ - 1.0) * std::pow(u, p_ - 2.0);
    case Family::Custom:
      return custom_.d2f(u);
  }
  return 0.0;
}

double Nonlinearity::g(double u) const {
  if (u <= 0.0) return -kInf;
  switch (family_) {
    case Family::PowerExp:
      return std::pow(u, q_) + p_ * std::log(u);
    case Family::CutoffExp:
      return std::log(cutoff_chi(u)) + a_ * u;
    case Family::PurePower:
      return p_ * std::log(u);
    case Family::Custom:
      return std::log(custom_.f(u));
  }
  return -kInf;
}

double Nonlinearity::dg(double u) const {
  if (u <= 0.0) return kInf;
  switch (family_) {
    case Family::PowerExp:
      return q_ * std::pow(u, q_ - 1.0) + p_ / u;
    case Family::CutoffExp:
      return cutoff_dchi(u) / cutoff_chi(u) + a_;
    case Family::PurePower:
      return p_ / u;
    case Family::Custom:
      return custom_.df(u) / custom_.f(u);
  }
  return 0.0;
}

double Nonlinearity::d2g(double u) const {
  if (u <= 0.0) return -kInf;
  switch (family_) {
    case Family::PowerExp:
      return (q_ * (q_ - 1.0) * std::pow(u, q_) - p_) / (u * u);
    case Family::CutoffExp: {
      const double c = cutoff_chi(u);
      const double r = cutoff_dchi(u) / c;
      return cutoff_d2chi(u) / c - r * r;
    }
    case Family::PurePower:
      return -p_ / (u * u);
    case Family::Custom: {
      const double fu = custom_.f(u);
      const double r = custom_.df(u) / fu;
      return custom_.d2f(u) / fu - r * r;
    }
  }
  return 0.0;
}

double Nonlinearity::log_ratio(double u, double t) const {
  if (t == 0.0) return 0.0;
  const double v = u + t;
  if (!(u > 0.0) || !(v > 0.0)) return g(v) - g(u);
  const double lr = std::log1p(t / u);
  switch (family_) {
    case Family::PowerExp:
      return std::pow(u, q_) * std::expm1(q_ * lr) + p_ * lr;
    case Family::CutoffExp:
      return std::log(cutoff_chi(v) / cutoff_chi(u)) + a_ * t;
    case Family::PurePower:
      return p_ * lr;
    case Family::Custom:
      return std::log(custom_.f(v) / custom_.f(u));
  }
  return g(v) - g(u);
}

double Nonlinearity::difference(double v, double u) const {
  const double d = v - u;
  // Second-order Taylor beats the cancelling difference while |g'(u) d| < 1e-5.
  if (u > 0.0 && v > 0.0 && std::abs(d * dg(u)) < 1e-5) {
    return df(u) * d + 0.5 * d2f(u) * d * d;
  }
  return f(v) - f(u);
}

std::string Nonlinearity::descriptor() const {
  switch (family_) {
    case Family::PowerExp:
      return "power-exp(p=" + format_param(p_) + ",q=" + format_param(q_) + ")";
    case Family::CutoffExp:
      return "cutoff-exp(a=" + format_param(a_) + ")";
    case Family::PurePower:
      return "pure-power(p=" + format_param(p_) + ")";
    case Family::Custom:
      return "custom(" + name_ + ")";
  }
  return "unknown";
}

nlohmann::json Nonlinearity::to_json() const {
  nlohmann::json j;
  j["descriptor"] = descriptor();
  switch (family_) {
    case Family::PowerExp:
      j["family"] = "power-exp";
      j["p"] = p_;
      j["q"] = q_;
      break;
    case Family::CutoffExp:
      j["family"] = "cutoff-exp";
      j["a"] = a_;
      break;
    case Family::PurePower:
      j["family"] = "pure-power";
      j["p"] = p_;
      break;
    case Family::Custom:
      j["family"] = "custom";
      j["name"] = name_;
      break;
  }
  j["tail"] = {{"kind", tail_.kind == TailKind::LogConvex ? "log-convex" : "power-law"},
               {"exponent", tail_.exponent},
               {"convex_from", tail_.convex_from}};
  return j;
}

}  // namespace stlab
