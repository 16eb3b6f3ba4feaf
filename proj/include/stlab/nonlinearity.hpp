#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace stlab {

enum class Family { PowerExp, CutoffExp, PurePower, Custom };

/// How log f(u) behaves for large u; decides the analytic tail of F.
enum class TailKind {
  /// g = log f is convex beyond `convex_from`, so the tail of F is bounded by
  /// 1 / (f(M) g'(M)).
  LogConvex,
  /// f(u) ~ C u^exponent, tail of F is M / ((exponent - 1) f(M)).
  PowerLaw,
};

struct TailGrowth {
  TailKind kind = TailKind::LogConvex;
  double exponent = 0.0;
  double convex_from = 0.0;
};

struct CustomFunctions {
  std::function<double(double)> f;
  std::function<double(double)> df;
  std::function<double(double)> d2f;
};

/// An admissible-candidate nonlinearity f on u >= 0 (f = 0 for u < 0).
///
/// Built-in families evaluate g = log f and its derivatives in closed form,
/// so g stays finite long after f itself overflows. Immutable once built.
class Nonlinearity {
 public:
  /// f(u) = u^p exp(u^q).
  static Nonlinearity power_exp(double p, double q);
  /// f(u) = chi(u) exp(a u) with the quintic C^2 cutoff chi; chi = 20 for u >= 4.
  static Nonlinearity cutoff_exp(double a = 20.0);
  /// f(u) = u^p.
  static Nonlinearity pure_power(double p);
  static Nonlinearity custom(std::string name, CustomFunctions fns, TailGrowth tail);

  Family family() const { return family_; }
  double p() const { return p_; }
  double q() const { return q_; }
  double a() const { return a_; }
  const TailGrowth& tail() const { return tail_; }

  double f(double u) const;
  double df(double u) const;
  double d2f(double u) const;

  /// log f(u); -inf at u <= 0.
  double g(double u) const;
  double dg(double u) const;
  double d2g(double u) const;

  /// g(u + t) - g(u) without the cancellation of subtracting two large logs.
  double log_ratio(double u, double t) const;

  /// f(v) - f(u), accurate when v is close to u.
  double difference(double v, double u) const;

  /// Short stable identifier such as "power-exp(p=5,q=2)".
  std::string descriptor() const;
  nlohmann::json to_json() const;

 private:
  Family family_ = Family::Custom;
  double p_ = 0.0;
  double q_ = 0.0;
  double a_ = 0.0;
  TailGrowth tail_;
  std::string name_;
  CustomFunctions custom_;
};

/// The quintic cutoff and its first two derivatives.
double cutoff_chi(double u);
double cutoff_dchi(double u);
double cutoff_d2chi(double u);

/// Critical Sobolev exponent (N + 2) / (N - 2).
double sobolev_exponent(int dim);

}  // namespace stlab
