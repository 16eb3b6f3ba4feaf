#include "stlab/radial_evolution.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "stlab/errors.hpp"
#include "stlab/quadrature.hpp"

namespace stlab {

namespace {

// exp(-x^2) is below 1e-18 past this many kernel widths 2 sqrt(t).
constexpr double kKernelReach = 6.5;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Tabulated J for N != 3: log J and its log-log slope at log-spaced a.
struct AngularTable {
  int dim = 0;
  double m = 0.0;
  double x0 = 0.0;
  double dx = 0.0;
  std::vector<double> logJ;
  std::vector<double> slope;
  double J0 = 0.0;
  double M1 = 0.0;
};

constexpr double kTableLo = 1e-6;
constexpr double kTableHi = 1e6;
constexpr int kPerDecade = 200;

double weight_m(double x, double m) {
  const double y = x * (2.0 - x);
  return y > 0.0 ? std::pow(y, m) : (m == 0.0 ? 1.0 : 0.0);
}

AngularTable make_table(int dim) {
  AngularTable tab;
  tab.dim = dim;
  tab.m = 0.5 * (dim - 3.0);
  const double m = tab.m;
  tab.x0 = std::log(kTableLo);
  const int n = static_cast<int>(std::lround(std::log10(kTableHi / kTableLo) * kPerDecade)) + 1;
  tab.dx = (std::log(kTableHi) - tab.x0) / (n - 1);
  tab.J0 = quad::adaptive([&](double x) { return weight_m(x, m); }, 0.0, 2.0, 1e-14).value;
  tab.M1 = quad::adaptive([&](double x) { return x * weight_m(x, m); }, 0.0, 2.0, 1e-14).value;
  for (int i = 0; i < n; ++i) {
    const double a = std::exp(tab.x0 + i * tab.dx);
    const double top = std::min(2.0, 60.0 / a);
    // Split at the scale 1/a so the exponential is resolved from the start.
    const double knee = std::min(top, 1.0 / a);
    auto integ = [&](auto&& h) {
      double v = quad::adaptive(h, 0.0, knee, 1e-13).value;
      if (top > knee) v += quad::adaptive(h, knee, top, 1e-13).value;
      return v;
    };
    const double J = integ([&](double x) { return std::exp(-a * x) * weight_m(x, m); });
    const double J1 = integ([&](double x) { return x * std::exp(-a * x) * weight_m(x, m); });
    tab.logJ.push_back(std::log(J));
    tab.slope.push_back(-a * J1 / J);
  }
  return tab;
}

const AngularTable& table_for(int dim) {
  static std::mutex mu;
  static std::map<int, AngularTable> tables;
  std::lock_guard<std::mutex> lock(mu);
  auto it = tables.find(dim);
  if (it == tables.end()) it = tables.emplace(dim, make_table(dim)).first;
  return it->second;
}

// Integral over [c, 1] of (1 - s^2)^m, the cap of a unit (m+2)-sphere up to |S^{m+1}|.
double cap_fraction(double c, double m) {
  if (c >= 1.0) return 0.0;
  if (c <= -1.0) c = -1.0;
  if (m == 0.0) return 1.0 - c;
  const double full = boost::math::beta(0.5, m + 1.0);
  if (c >= 0.0) return 0.5 * full * boost::math::ibetac(0.5, m + 1.0, c * c);
  return full - 0.5 * full * boost::math::ibetac(0.5, m + 1.0, c * c);
}

// Surface measure of {w in S^{N-1} : |rho w - z e_1| <= 1}.
double shell_window(int dim, double rho, double z) {
  if (z == 0.0 || rho == 0.0) return (rho <= 1.0 - z) ? sphere_area(dim - 1) : 0.0;
  if (rho <= 1.0 - z) return sphere_area(dim - 1);
  if (rho >= z + 1.0 || rho <= z - 1.0) return 0.0;
  const double c = (rho * rho + z * z - 1.0) / (2.0 * rho * z);
  return sphere_area(dim - 2) * cap_fraction(c, 0.5 * (dim - 3.0));
}

}  // namespace

RadialGrid RadialGrid::geometric_uniform(int dim, double R_outer, int M, double r1,
                                         double growth) {
  if (dim < 1) throw std::invalid_argument("dimension must be positive");
  if (!(R_outer > 0.0)) throw std::invalid_argument("R_outer must be positive");
  if (M < 4) throw std::invalid_argument("need at least 4 cells");
  if (r1 <= 0.0) r1 = 1e-3 * R_outer;
  if (!(r1 < R_outer)) throw std::invalid_argument("r1 must lie inside (0, R_outer)");
  auto build = [&](double q) -> std::vector<double> {
    std::vector<double> r{0.0, r1};
    while (true) {
      const int rem = M - (static_cast<int>(r.size()) - 1);
      if (rem < 1) return {};
      const double hu = (R_outer - r.back()) / rem;
      if (r.back() * (q - 1.0) >= hu) break;
      r.push_back(r.back() * q);
    }
    const int rem = M - (static_cast<int>(r.size()) - 1);
    const double start = r.back();
    const double hu = (R_outer - start) / rem;
    for (int k = 1; k <= rem; ++k) r.push_back(start + k * hu);
    r.back() = R_outer;
    return r;
  };
  RadialGrid g;
  g.dim = dim;
  if (growth > 1.0) {
    g.r = build(growth);
    if (g.r.empty()) throw std::invalid_argument("M too small for r1 and growth");
    return g;
  }
  // Auto: the gentlest ratio that still leaves a quarter of the nodes uniform.
  for (double q = 1.02; q <= 3.0; q += 0.01) {
    auto r = build(q);
    if (r.empty()) continue;
    int geometric = 1;
    while (geometric + 1 < static_cast<int>(r.size()) &&
           std::abs(r[geometric + 1] / r[geometric] - q) < 1e-12)
      ++geometric;
    if (M - geometric >= M / 4) {
      g.r = std::move(r);
      return g;
    }
  }
  throw std::invalid_argument("no geometric ratio fits M and r1");
}

RadialGrid RadialGrid::uniform(int dim, double R_outer, int M) {
  if (!(R_outer > 0.0) || M < 2) throw std::invalid_argument("bad uniform grid");
  RadialGrid g;
  g.dim = dim;
  g.r.resize(M + 1);
  for (int i = 0; i <= M; ++i) g.r[i] = R_outer * i / M;
  g.r.back() = R_outer;
  return g;
}

RadialGrid RadialGrid::refined() const {
  RadialGrid g = *this;
  g.r.clear();
  for (std::size_t i = 0; i + 1 < r.size(); ++i) {
    g.r.push_back(r[i]);
    g.r.push_back(0.5 * (r[i] + r[i + 1]));
  }
  g.r.push_back(r.back());
  return g;
}

std::vector<double> RadialGrid::control_volumes() const {
  const std::size_t n = r.size();
  std::vector<double> v(n);
  auto face = [&](std::size_t i) { return 0.5 * (r[i] + r[i + 1]); };
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = i == 0 ? 0.0 : face(i - 1);
    const double hi = i + 1 == n ? r.back() : face(i);
    v[i] = (std::pow(hi, dim) - std::pow(lo, dim)) / dim;
  }
  return v;
}

RadialField RadialField::constant(const RadialGrid& grid, double c) {
  RadialField f;
  f.grid = grid;
  f.values.assign(grid.r.size(), c);
  f.cap_mask.assign(grid.r.size(), 0);
  return f;
}

double RadialField::sup() const { return *std::max_element(values.begin(), values.end()); }

double RadialField::exterior_value() const {
  return grid.bc == OuterBC::Dirichlet ? grid.outer_value : values.back();
}

double RadialField::at(double radius) const {
  const auto& r = grid.r;
  if (radius >= r.back()) return radius == r.back() ? values.back() : exterior_value();
  if (radius <= 0.0) return values.front();
  const auto it = std::upper_bound(r.begin(), r.end(), radius);
  const std::size_t j = static_cast<std::size_t>(it - r.begin());
  const double w = (radius - r[j - 1]) / (r[j] - r[j - 1]);
  return (1.0 - w) * values[j - 1] + w * values[j];
}

bool RadialField::any_capped() const {
  return std::any_of(cap_mask.begin(), cap_mask.end(), [](char c) { return c != 0; });
}

RadialField sample_singular(const SingularSolutionTable& table, RadialGrid grid, double cap) {
  if (grid.dim != table.dim) throw std::invalid_argument("grid and table dimensions differ");
  if (!(cap > 0.0)) throw std::invalid_argument("cap must be positive");
  if (grid.R_outer() > table.r_end()) {
    throw OutOfRange("grid reaches past the end of the u* table");
  }
  grid.bc = OuterBC::Dirichlet;
  grid.outer_value = std::min(cap, table.value(grid.R_outer()));
  RadialField f;
  f.grid = grid;
  const std::size_t n = grid.r.size();
  f.values.resize(n);
  f.cap_mask.assign(n, 0);
  const int N = grid.dim;
  const double rho = 0.5 * grid.r[1];
  // Inside r_patch every value is a root find, so that part of the ball uses
  // w = (s / b)^N = v^8 and a fixed rule; the v^7 factor absorbs the growth of u*.
  const double b = std::min(rho, table.r_patch);
  const auto& gl = quad::gauss_legendre(32);
  double inner = 0.0;
  for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
    const double v = 0.5 * (gl.nodes[k] + 1.0);
    inner += 0.5 * gl.weights[k] * table.value(b * std::pow(v, 8.0 / N)) * 8.0 * std::pow(v, 7);
  }
  double integral = inner * std::pow(b, N) / N;
  if (rho > b) {
    integral += quad::adaptive([&](double x) { return table.value(std::exp(x)) * std::exp(N * x); },
                               std::log(b), std::log(rho), 1e-10)
                    .value;
  }
  const double avg = N * integral / std::pow(rho, N);
  for (std::size_t i = 0; i < n; ++i) {
    const double raw = i == 0 ? avg : table.value(grid.r[i]);
    f.values[i] = std::min(cap, raw);
    f.cap_mask[i] = raw > cap ? 1 : 0;
  }
  f.values.back() = grid.outer_value;
  return f;
}

double sphere_area(int k) {
  const double h = 0.5 * (k + 1.0);
  return 2.0 * std::pow(std::numbers::pi, h) / std::tgamma(h);
}

double unit_ball_volume(int dim) { return sphere_area(dim - 1) / dim; }

double angular_kernel(int dim, double a) {
  if (a < 0.0) throw std::invalid_argument("angular kernel needs a >= 0");
  if (dim == 3) return a == 0.0 ? 2.0 : -std::expm1(-2.0 * a) / a;
  const AngularTable& tab = table_for(dim);
  if (a < kTableLo) return tab.J0 - a * tab.M1;
  const double m = tab.m;
  if (a > kTableHi) {
    const double g1 = std::tgamma(m + 1.0);
    return std::pow(2.0, m) * g1 / std::pow(a, m + 1.0) *
           (1.0 - 0.5 * m * (m + 1.0) / a + m * (m - 1.0) * (m + 1.0) * (m + 2.0) / (8.0 * a * a));
  }
  const double x = std::log(a);
  const double pos = (x - tab.x0) / tab.dx;
  const std::size_t i =
      std::min(static_cast<std::size_t>(pos), tab.logJ.size() - 2);
  const double t = pos - static_cast<double>(i);
  const double h00 = (1 + 2 * t) * (1 - t) * (1 - t);
  const double h10 = t * (1 - t) * (1 - t);
  const double h01 = t * t * (3 - 2 * t);
  const double h11 = t * t * (t - 1);
  return std::exp(h00 * tab.logJ[i] + h10 * tab.dx * tab.slope[i] + h01 * tab.logJ[i + 1] +
                  h11 * tab.dx * tab.slope[i + 1]);
}

HeatSemigroup::HeatSemigroup(RadialGrid grid) : grid_(std::move(grid)) {
  if (grid_.r.size() < 3) throw std::invalid_argument("grid too small");
}

HeatSemigroup::Operator HeatSemigroup::build(double t) const {
  const auto& r = grid_.r;
  const int N = grid_.dim;
  const std::size_t n = r.size();
  const double C = std::pow(4.0 * std::numbers::pi * t, -0.5 * N) * sphere_area(N - 2);
  const double sq = std::sqrt(t);
  const double reach = kKernelReach * 2.0 * sq;
  const auto& gl = quad::gauss_legendre(8);
  Operator op;
  op.W.assign(n * n, 0.0);
  op.tail.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double ri = r[i];
    auto kernel = [&](double rho) {
      const double d = ri - rho;
      return C * std::exp(-d * d / (4.0 * t)) * angular_kernel(N, ri * rho / (2.0 * t)) *
             std::pow(rho, N - 1);
    };
    // Integrates kernel * (1, rho) over [lo, hi] on pieces no wider than sqrt(t).
    auto moments = [&](double lo, double hi, double& m0, double& m1) {
      m0 = m1 = 0.0;
      const int pieces = std::max(1, static_cast<int>(std::ceil((hi - lo) / sq)));
      const double w = (hi - lo) / pieces;
      for (int k = 0; k < pieces; ++k) {
        const double a = lo + k * w;
        for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
          const double x = a + 0.5 * w * (gl.nodes[q] + 1.0);
          const double v = 0.5 * w * gl.weights[q] * kernel(x);
          m0 += v;
          m1 += v * x;
        }
      }
    };
    double row = 0.0;
    for (std::size_t c = 0; c + 1 < n; ++c) {
      const double lo = std::max(r[c], ri - reach);
      const double hi = std::min(r[c + 1], ri + reach);
      if (!(hi > lo)) continue;
      double m0 = 0.0;
      double m1 = 0.0;
      moments(lo, hi, m0, m1);
      const double h = r[c + 1] - r[c];
      // Hat functions: (r_{c+1} - rho)/h to node c, (rho - r_c)/h to node c+1.
      op.W[i * n + c] += (r[c + 1] * m0 - m1) / h;
      op.W[i * n + c + 1] += (m1 - r[c] * m0) / h;
      row += m0;
    }
    const double R = r.back();
    if (ri + reach > R) {
      double m0 = 0.0;
      double m1 = 0.0;
      moments(R, std::max(R, ri) + reach, m0, m1);
      op.tail[i] = m0;
      row += m0;
    }
    op.mass_defect = std::max(op.mass_defect, std::abs(1.0 - row));
  }
  return op;
}

const HeatSemigroup::Operator& HeatSemigroup::op(double t) {
  if (!(t > 0.0)) throw std::invalid_argument("semigroup time must be positive");
  auto it = cache_.find(t);
  if (it == cache_.end()) it = cache_.emplace(t, build(t)).first;
  if (it->second.mass_defect > 1e-8) {
    throw QuadratureFailure("radial heat kernel mass defect " +
                            std::to_string(it->second.mass_defect) + " at t=" + std::to_string(t));
  }
  return it->second;
}

double HeatSemigroup::mass_defect(double t) {
  auto it = cache_.find(t);
  if (it == cache_.end()) it = cache_.emplace(t, build(t)).first;
  return it->second.mass_defect;
}

std::vector<double> HeatSemigroup::apply(const std::vector<double>& values, double exterior,
                                         double t) {
  const Operator& o = op(t);
  const std::size_t n = grid_.r.size();
  if (values.size() != n) throw std::invalid_argument("field does not match the grid");
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* w = &o.W[i * n];
    double s = o.tail[i] * exterior;
    for (std::size_t j = 0; j < n; ++j) s += w[j] * values[j];
    out[i] = s;
  }
  return out;
}

RadialField HeatSemigroup::apply(const RadialField& field, double t) {
  RadialField out = field;
  out.values = apply(field.values, field.exterior_value(), t);
  if (grid_.bc == OuterBC::Dirichlet) out.values.back() = grid_.outer_value;
  std::fill(out.cap_mask.begin(), out.cap_mask.end(), 0);
  return out;
}

RadialField apply_semigroup(const RadialField& field, double t) {
  HeatSemigroup S(field.grid);
  return S.apply(field, t);
}

double window_integral(const RadialField& field, double p, double z) {
  if (!(p >= 1.0)) throw std::invalid_argument("p must be at least 1");
  const auto& r = field.grid.r;
  const int N = field.grid.dim;
  const double lo = std::max(0.0, z - 1.0);
  const double hi = z + 1.0;
  std::vector<double> cuts{lo, hi};
  for (double x : r) {
    if (x > lo && x < hi) cuts.push_back(x);
  }
  const double kink = std::abs(1.0 - z);
  if (kink > lo && kink < hi) cuts.push_back(kink);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const auto& gl = quad::gauss_legendre(8);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k];
    const double b = cuts[k + 1];
    for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
      const double x = a + 0.5 * (b - a) * (gl.nodes[q] + 1.0);
      const double u = std::abs(field.at(x));
      total += 0.5 * (b - a) * gl.weights[q] * std::pow(u, p) * std::pow(x, N - 1) *
               shell_window(N, x, z);
    }
  }
  return total;
}

ULNormEstimate ul_norm(const RadialField& field, double p) {
  ULNormEstimate est;
  est.p = p;
  const auto& v = field.values;
  bool nonincreasing = field.exterior_value() <= v.back();
  for (std::size_t i = 1; i < v.size() && nonincreasing; ++i) {
    nonincreasing = std::abs(v[i]) <= std::abs(v[i - 1]);
  }
  if (nonincreasing) {
    est.centers = {0.0};
    est.best_center = 0.0;
    est.window_integral = window_integral(field, p, 0.0);
  } else {
    const int n = 512;
    const double R = field.grid.R_outer();
    std::size_t best = 0;
    std::vector<double> vals(n);
    for (int k = 0; k < n; ++k) {
      const double z = R * k / (n - 1);
      est.centers.push_back(z);
      vals[k] = window_integral(field, p, z);
      if (vals[k] > vals[best]) best = k;
    }
    const double a = est.centers[best > 0 ? best - 1 : 0];
    const double b = est.centers[std::min<std::size_t>(best + 1, n - 1)];
    const auto res = boost::math::tools::brent_find_minima(
        [&](double z) { return -window_integral(field, p, z); }, a, b, 40);
    est.best_center = res.first;
    est.window_integral = -res.second;
    if (vals[best] > est.window_integral) {
      est.best_center = est.centers[best];
      est.window_integral = vals[best];
    }
    est.centers.push_back(res.first);
  }
  est.value = std::pow(est.window_integral, 1.0 / p);
  return est;
}

RadialLaplacian::RadialLaplacian(const RadialGrid& grid) {
  const auto& r = grid.r;
  const std::size_t n = r.size();
  const auto vol = grid.control_volumes();
  lower.assign(n, 0.0);
  diag.assign(n, 0.0);
  upper.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double face = 0.5 * (r[i] + r[i + 1]);
    const double c = std::pow(face, grid.dim - 1) / (r[i + 1] - r[i]);
    upper[i] = c / vol[i];
    diag[i] -= c / vol[i];
    lower[i + 1] = c / vol[i + 1];
    diag[i + 1] -= c / vol[i + 1];
  }
}

std::vector<double> RadialLaplacian::apply(const std::vector<double>& u) const {
  const std::size_t n = u.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = diag[i] * u[i];
    if (i > 0) s += lower[i] * u[i - 1];
    if (i + 1 < n) s += upper[i] * u[i + 1];
    out[i] = s;
  }
  return out;
}

std::vector<double> implicit_diffusion_solve(const RadialLaplacian& L, const RadialGrid& grid,
                                             double dt, std::vector<double> rhs) {
  const std::size_t n = rhs.size();
  std::vector<double> a(n), b(n), c(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = -dt * L.lower[i];
    b[i] = 1.0 - dt * L.diag[i];
    c[i] = -dt * L.upper[i];
  }
  if (grid.bc == OuterBC::Dirichlet) {
    a[n - 1] = 0.0;
    b[n - 1] = 1.0;
    rhs[n - 1] = grid.outer_value;
  }
  // Thomas algorithm; the matrix is a diagonally dominant M-matrix.
  for (std::size_t i = 1; i < n; ++i) {
    if (!(std::abs(b[i - 1]) > 0.0)) throw LinearSolveFailure("zero pivot in diffusion solve");
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  if (!(std::abs(b[n - 1]) > 0.0)) throw LinearSolveFailure("zero pivot in diffusion solve");
  rhs[n - 1] /= b[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - c[i] * rhs[i + 1]) / b[i];
  for (double x : rhs) {
    if (!std::isfinite(x)) throw LinearSolveFailure("non-finite diffusion solution");
  }
  return rhs;
}

RadialField step_imex(const RadialField& field, const Nonlinearity& spec, double dt,
                      const ImexOptions& opts) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  RadialField out = field;
  std::vector<double> rhs = field.values;
  if (opts.reaction) {
    const double fmax = spec.f(field.sup());
    if (!std::isfinite(fmax) || fmax * dt > opts.overflow_guard) {
      throw ReactionOverflow("f(max u) dt = " + std::to_string(fmax * dt));
    }
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += dt * spec.f(field.values[i]);
  }
  const RadialLaplacian L(field.grid);
  out.values = implicit_diffusion_solve(L, field.grid, dt, std::move(rhs));
  std::fill(out.cap_mask.begin(), out.cap_mask.end(), 0);
  return out;
}

double stable_dt(const RadialField& field, const Nonlinearity& spec, double safety) {
  return safety / (spec.df(field.sup()) + 1e-300);
}

void write_snapshots_csv(const std::string& path, const std::vector<double>& times,
                         const std::vector<RadialField>& fields) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "t,r,u\n";
  for (std::size_t k = 0; k < fields.size(); ++k) {
    const auto& f = fields[k];
    for (std::size_t i = 0; i < f.values.size(); ++i) {
      os << fmt17(times[k]) << ',' << fmt17(f.grid.r[i]) << ',' << fmt17(f.values[i]) << '\n';
    }
  }
}

}  // namespace stlab
