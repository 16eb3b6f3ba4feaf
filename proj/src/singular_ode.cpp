#include "stlab/singular_ode.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "stlab/errors.hpp"
#include "stlab/quadrature.hpp"

namespace stlab {

namespace {

using State = std::array<double, 2>;

// The radial equation in s = log r with state (u - offset, v = r u').
struct LogRadialRhs {
  const Nonlinearity& spec;
  int dim;
  double offset = 0.0;
  State operator()(double s, const State& y) const {
    const double u = offset + y[0];
    const double src = u > 0.0 ? std::exp(2.0 * s + spec.g(u)) : 0.0;
    return {y[1], -(dim - 2.0) * y[1] - src};
  }
};

struct Trajectory {
  std::vector<double> s;
  std::vector<double> u;
  std::vector<double> v;
  std::optional<double> s_vanish;
  double error_sum = 0.0;
  long steps = 0;
};

// Samples the solution on `grid` (ascending, grid.back() is the end point).
Trajectory run_log_radial(const Nonlinearity& spec, int dim, double s0, State y0,
                          const std::vector<double>& grid, const ode::Tolerances& tol,
                          double offset = 0.0) {
  Trajectory tr;
  tr.s.reserve(grid.size());
  tr.u.reserve(grid.size());
  tr.v.reserve(grid.size());
  std::size_t next = 0;
  auto observer = [&](const ode::DenseStep<2>& step) {
    if (offset + step.y1[0] <= 0.0) {
      double lo = step.t0;
      double hi = step.t1;
      for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++i) {
        const double mid = 0.5 * (lo + hi);
        (offset + step.at(mid)[0] > 0.0 ? lo : hi) = mid;
      }
      while (next < grid.size() && grid[next] < lo) {
        const State y = step.at(grid[next]);
        tr.s.push_back(grid[next]);
        tr.u.push_back(offset + y[0]);
        tr.v.push_back(y[1]);
        ++next;
      }
      tr.s_vanish = hi;
      tr.s.push_back(hi);
      tr.u.push_back(0.0);
      tr.v.push_back(step.at(hi)[1]);
      return false;
    }
    while (next < grid.size() && grid[next] <= step.t1) {
      const State y = grid[next] == step.t1 ? step.y1 : step.at(grid[next]);
      tr.s.push_back(grid[next]);
      tr.u.push_back(offset + y[0]);
      tr.v.push_back(y[1]);
      ++next;
    }
    return true;
  };
  const auto out = ode::integrate<2>(LogRadialRhs{spec, dim, offset}, s0, y0, grid.back(), tol,
                                     observer);
  tr.error_sum = out.stats.error_sum;
  tr.steps = out.stats.accepted;
  return tr;
}

// Points after s0 up to s_end, uniform in log(r + rho) with rho chosen so the
// spacing is about h_min near the origin and r ds far out. The last point is
// s_end exactly.
std::vector<double> output_grid(double s0, double s_end, double ds, double h_min) {
  const double rho = h_min > 0.0 ? h_min / std::expm1(ds) : 0.0;
  const double x0 = std::log(std::exp(s0) + rho);
  const double x1 = std::log(std::exp(s_end) + rho);
  const long n = std::max(1L, static_cast<long>(std::ceil((x1 - x0) / ds)));
  std::vector<double> grid;
  grid.reserve(n);
  for (long k = 1; k < n; ++k) {
    grid.push_back(std::log(std::exp(x0 + (x1 - x0) * k / n) - rho));
  }
  grid.push_back(s_end);
  return grid;
}

// Cumulative integral of exp(g(u) + N s) over a sampled trajectory, trapezoid
// plus the endpoint-derivative correction (fourth order on smooth data).
std::vector<double> cumulative_flux(const Nonlinearity& spec, int dim,
                                    const std::vector<double>& s, const std::vector<double>& u,
                                    const std::vector<double>& v) {
  const std::size_t n = s.size();
  std::vector<double> h(n);
  std::vector<double> dh(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (u[i] > 0.0) {
      h[i] = std::exp(spec.g(u[i]) + dim * s[i]);
      dh[i] = h[i] * (spec.dg(u[i]) * v[i] + dim);
    }
  }
  std::vector<double> acc(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    const double d = s[i] - s[i - 1];
    acc[i] = acc[i - 1] + 0.5 * d * (h[i] + h[i - 1]) - d * d / 12.0 * (dh[i] - dh[i - 1]);
  }
  return acc;
}

double kappa_patch_u(const Nonlinearity& spec, int dim, double r, const BarrierOptions& barrier,
                     double* kappa_out) {
  double kappa = 1.0;
  double u = 0.0;
  const double log_r2 = 2.0 * std::log(r);
  for (int iter = 0; iter < 100; ++iter) {
    const double denom = 2.0 * dim - 4.0 * kappa;
    if (!(denom > 0.0)) {
      throw OutOfRange("2N - 4 f'F is not positive at r=" + std::to_string(r) +
                       "; no singular patch for " + spec.descriptor());
    }
    u = F_inverse_from_log(spec, log_r2 - std::log(denom), barrier);
    const double next = fprime_F(spec, u, barrier);
    const bool done = std::abs(next - kappa) <= 1e-14 * std::abs(next);
    kappa = next;
    if (done) break;
  }
  if (kappa_out) *kappa_out = kappa;
  return u;
}

// Integral over (0, r) of f(patch(s)) s^{N-1} ds, in t = log s.
double formula_flux(const Nonlinearity& spec, int dim, double r, PatchMethod method,
                    const BarrierOptions& barrier) {
  const double t_hi = std::log(r);
  const double t_lo = t_hi - 60.0 / (dim - 2.0);
  auto integrand = [&](double t) {
    const double u = patch_value(spec, dim, std::exp(t), method, barrier);
    return std::exp(spec.g(u) + dim * t);
  };
  return quad::adaptive(integrand, t_lo, t_hi, 1e-10).value;
}

double hermite(double s0, double s1, double w0, double w1, double d0, double d1, double s,
               double* deriv) {
  const double h = s1 - s0;
  const double t = (s - s0) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1;
  const double h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2;
  const double h11 = t3 - t2;
  if (deriv) {
    const double g00 = (6 * t2 - 6 * t) / h;
    const double g10 = 3 * t2 - 4 * t + 1;
    const double g01 = (-6 * t2 + 6 * t) / h;
    const double g11 = 3 * t2 - 2 * t;
    *deriv = g00 * w0 + g10 * d0 + g01 * w1 + g11 * d1;
  }
  return h00 * w0 + h10 * h * d0 + h01 * w1 + h11 * h * d1;
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  return den == 0.0 ? 0.0 : (n * sxy - sx * sy) / den;
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string to_string(PatchMethod m) {
  switch (m) {
    case PatchMethod::Asymptotic:
      return "F-inverse asymptotic";
    case PatchMethod::KappaCorrected:
      return "F-inverse asymptotic, f'F corrected";
    case PatchMethod::Refined:
      return "F-inverse asymptotic, f'F corrected, pre-integrated";
  }
  return "unknown";
}

PatchMethod patch_method_from_string(const std::string& name) {
  if (name == "asymptotic" || name == "plain") return PatchMethod::Asymptotic;
  if (name == "kappa" || name == "kappa-corrected") return PatchMethod::KappaCorrected;
  if (name == "refined") return PatchMethod::Refined;
  throw ConfigError("unknown patch method '" + name + "' (asymptotic|kappa|refined)");
}

double patch_value(const Nonlinearity& spec, int dim, double r, PatchMethod method,
                   const BarrierOptions& barrier) {
  if (method == PatchMethod::Asymptotic) {
    return F_inverse_from_log(spec, 2.0 * std::log(r) - std::log(2.0 * dim - 4.0), barrier);
  }
  return kappa_patch_u(spec, dim, r, barrier, nullptr);
}

PatchSeed patch_seed(const Nonlinearity& spec, int dim, double r, PatchMethod method,
                     const SingularOptions& opts) {
  if (dim < 3) throw std::invalid_argument("singular solutions need N >= 3");
  if (!(r > 0.0)) throw std::invalid_argument("patch radius must be positive");
  PatchSeed seed;
  seed.r = r;
  if (method == PatchMethod::Asymptotic) {
    seed.u = patch_value(spec, dim, r, method, opts.barrier);
    seed.v = -std::exp(2.0 * std::log(r) + spec.g(seed.u)) / (dim - 2.0);
    seed.kappa = 1.0;
    return seed;
  }
  const double r0 = method == PatchMethod::Refined ? r * std::pow(10.0, -opts.pre_decades) : r;
  seed.u = kappa_patch_u(spec, dim, r0, opts.barrier, &seed.kappa);
  seed.v = -std::exp(2.0 * std::log(r0) + spec.g(seed.u)) / (dim - 2.0 * seed.kappa);
  if (method == PatchMethod::Refined) {
    const auto out = ode::integrate<2>(
        LogRadialRhs{spec, dim}, std::log(r0), State{seed.u, seed.v}, std::log(r), opts.tol,
        [](const ode::DenseStep<2>&) { return true; });
    seed.u = out.y[0];
    seed.v = out.y[1];
  }
  return seed;
}

namespace {

SingularSolutionTable build_once(const Nonlinearity& spec, int dim, const SingularOptions& opts) {
  SingularSolutionTable table;
  table.spec = spec;
  table.dim = dim;
  table.r_patch = opts.r_patch;
  table.R_max = opts.R_max;
  table.method = opts.patch;
  table.pre_decades = opts.patch == PatchMethod::Refined ? opts.pre_decades : 0.0;
  table.tol = opts.tol;
  table.barrier = opts.barrier;

  const double ds = std::log(10.0) / opts.samples_per_decade;
  const double s_patch = std::log(opts.r_patch);

  // Patch flux: formula below the innermost seed, quadrature over any
  // pre-integrated stretch.
  if (opts.patch == PatchMethod::Refined) {
    const double r0 = opts.r_patch * std::pow(10.0, -opts.pre_decades);
    double kappa = 1.0;
    const double u0 = kappa_patch_u(spec, dim, r0, opts.barrier, &kappa);
    const double v0 = -std::exp(2.0 * std::log(r0) + spec.g(u0)) / (dim - 2.0 * kappa);
    const double s0 = std::log(r0);
    auto grid = output_grid(s0, s_patch, ds, 0.0);
    const auto pre = run_log_radial(spec, dim, s0, {u0, v0}, grid, opts.tol);
    if (pre.s_vanish) throw PatchMismatch("u* vanished inside the patch for " + spec.descriptor());
    std::vector<double> s{s0}, u{u0}, v{v0};
    s.insert(s.end(), pre.s.begin(), pre.s.end());
    u.insert(u.end(), pre.u.begin(), pre.u.end());
    v.insert(v.end(), pre.v.begin(), pre.v.end());
    table.patch_flux = formula_flux(spec, dim, r0, PatchMethod::KappaCorrected, opts.barrier) +
                       cumulative_flux(spec, dim, s, u, v).back();
    table.seed = {opts.r_patch, u.back(), v.back(), kappa};
    table.steps += pre.steps;
  } else {
    table.seed = patch_seed(spec, dim, opts.r_patch, opts.patch, opts);
    table.patch_flux = formula_flux(spec, dim, opts.r_patch, opts.patch, opts.barrier);
  }

  const auto grid = output_grid(s_patch, std::log(opts.R_max), ds, 0.0);
  const auto tr =
      run_log_radial(spec, dim, s_patch, {table.seed.u, table.seed.v}, grid, opts.tol);
  table.error_estimate = tr.error_sum;
  table.steps += tr.steps;
  table.reached_R_max = !tr.s_vanish.has_value();
  table.r.resize(tr.s.size());
  table.u = tr.u;
  table.du.resize(tr.s.size());
  for (std::size_t i = 0; i < tr.s.size(); ++i) {
    table.r[i] = std::exp(tr.s[i]);
    table.du[i] = tr.v[i] / table.r[i];
  }
  if (!table.r.empty()) table.r.back() = tr.s_vanish ? table.r.back() : opts.R_max;
  return table;
}

}  // namespace

SingularSolutionTable build_singular(const Nonlinearity& spec, int dim,
                                     const SingularOptions& opts) {
  if (dim < 3) throw std::invalid_argument("singular solutions need N >= 3");
  if (!(opts.r_patch > 0.0) || !(opts.R_max > 2.0 * opts.r_patch)) {
    throw std::invalid_argument("need 0 < 2 r_patch < R_max");
  }
  if (opts.samples_per_decade < 10) throw std::invalid_argument("samples_per_decade too small");
  SingularSolutionTable table = build_once(spec, dim, opts);
  if (opts.check_patch) {
    SingularOptions half = opts;
    half.r_patch = 0.5 * opts.r_patch;
    half.check_patch = false;
    const SingularSolutionTable other = build_once(spec, dim, half);
    const double r_hi = std::min(table.r_end(), other.r_end());
    double worst = 0.0;
    double worst_r = 0.0;
    for (std::size_t i = 0; i < table.r.size(); ++i) {
      const double r = table.r[i];
      if (r < 2.0 * opts.r_patch || r > r_hi) continue;
      if (table.u[i] == 0.0) continue;
      const double d = std::abs(table.u[i] - other.value(r)) / std::abs(table.u[i]);
      if (d > worst) {
        worst = d;
        worst_r = r;
      }
    }
    table.patch_mismatch = worst;
    if (worst > opts.patch_tol) {
      throw PatchMismatch("re-seeding at r_patch/2 changes u* by " + std::to_string(worst) +
                          " (relative) at r=" + std::to_string(worst_r) + ", above patch_tol " +
                          std::to_string(opts.patch_tol));
    }
  }
  return table;
}

double SingularSolutionTable::value(double radius) const {
  if (!(radius > 0.0)) throw OutOfRange("u* is singular at r = 0");
  if (radius < r_patch) {
    return patch_value(spec, dim, radius,
                       method == PatchMethod::Asymptotic ? PatchMethod::Asymptotic
                                                         : PatchMethod::KappaCorrected,
                       barrier);
  }
  if (radius > r.back()) throw OutOfRange("r=" + std::to_string(radius) + " beyond the table");
  const double s = std::log(radius);
  if (radius <= r.front()) {
    return hermite(std::log(seed.r), std::log(r.front()), seed.u, u.front(), seed.v,
                   r.front() * du.front(), s, nullptr);
  }
  const auto it = std::lower_bound(r.begin(), r.end(), radius);
  const std::size_t i = static_cast<std::size_t>(it - r.begin());
  if (r[i] == radius) return u[i];
  return hermite(std::log(r[i - 1]), std::log(r[i]), u[i - 1], u[i], r[i - 1] * du[i - 1],
                 r[i] * du[i], s, nullptr);
}

double SingularSolutionTable::derivative(double radius) const {
  if (!(radius >= r_patch)) {
    const double h = radius * 1e-6;
    return (value(radius + h) - value(radius - h)) / (2 * h);
  }
  if (radius > r.back()) throw OutOfRange("r=" + std::to_string(radius) + " beyond the table");
  const double s = std::log(radius);
  double d = 0.0;
  if (radius <= r.front()) {
    hermite(std::log(seed.r), std::log(r.front()), seed.u, u.front(), seed.v,
            r.front() * du.front(), s, &d);
    return d / radius;
  }
  const auto it = std::lower_bound(r.begin(), r.end(), radius);
  const std::size_t i = static_cast<std::size_t>(it - r.begin());
  if (r[i] == radius) return du[i];
  hermite(std::log(r[i - 1]), std::log(r[i]), u[i - 1], u[i], r[i - 1] * du[i - 1],
          r[i] * du[i], s, &d);
  return d / radius;
}

void SingularSolutionTable::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "r,u_star,du_star\n";
  for (std::size_t i = 0; i < r.size(); ++i) {
    os << fmt17(r[i]) << ',' << fmt17(u[i]) << ',' << fmt17(du[i]) << '\n';
  }
}

nlohmann::json SingularSolutionTable::sidecar() const {
  nlohmann::json j;
  j["N"] = dim;
  j["r_patch"] = r_patch;
  j["R_max"] = R_max;
  j["r_end"] = r.empty() ? 0.0 : r.back();
  j["reached_R_max"] = reached_R_max;
  j["spec_descriptor"] = spec.descriptor();
  j["patch"] = {{"method", to_string(method)},
                {"pre_decades", pre_decades},
                {"seed_u", seed.u},
                {"seed_du", seed.v / seed.r},
                {"seed_f_prime_F", seed.kappa},
                {"flux", patch_flux}};
  if (patch_mismatch) j["patch"]["mismatch"] = *patch_mismatch;
  j["tolerances"] = {{"abs_tol", tol.abs_tol},
                     {"rel_tol", tol.rel_tol},
                     {"min_step_log_r", tol.min_step},
                     {"tol_F", barrier.tol_F}};
  j["error_estimate"] = error_estimate;
  j["steps"] = steps;
  j["rows"] = r.size();
  return j;
}

ShootingSolution integrate_regular(const Nonlinearity& spec, int dim, double alpha, double R_max,
                                   const RegularOptions& opts) {
  if (dim < 3) throw std::invalid_argument("regular solutions need N >= 3 here");
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be nonnegative");
  if (!(R_max > 0.0)) throw std::invalid_argument("R_max must be positive");
  ShootingSolution sol;
  sol.alpha = alpha;
  sol.dim = dim;
  const double ds = std::log(10.0) / opts.samples_per_decade;
  if (alpha == 0.0 || spec.f(alpha) == 0.0) {
    sol.r_start = std::min(opts.r_start_max, R_max);
    const auto grid = output_grid(std::log(sol.r_start), std::log(R_max), ds, 0.0);
    sol.r.push_back(sol.r_start);
    for (double s : grid) sol.r.push_back(std::exp(s));
    sol.u.assign(sol.r.size(), alpha);
    sol.du.assign(sol.r.size(), 0.0);
    return sol;
  }
  const double ga = spec.g(alpha);
  // Keep the O(r^2) term of the centre expansion below 1e-8 alpha.
  const double r_layer = std::exp(0.5 * (std::log(2.0 * dim * alpha) - ga));
  sol.r_start = std::min({opts.r_start_max, 1e-4 * r_layer, 0.5 * R_max});
  const double s0 = std::log(sol.r_start);
  const double fr2 = std::exp(ga + 2.0 * s0);
  const double b_r4 = std::exp(2.0 * ga + 4.0 * s0) * spec.dg(alpha) / (8.0 * dim * (dim + 2.0));
  // Integrate u - alpha so the tolerance resolves the small drop near the centre.
  const State y0{-fr2 / (2.0 * dim) + b_r4, -fr2 / dim + 4.0 * b_r4};
  // f(u) varies on the scale 1/g'(alpha), so the centre spacing shrinks with alpha g'(alpha).
  const double width = r_layer / std::sqrt(std::max(1.0, alpha * spec.dg(alpha) / 3.0));
  const auto grid = output_grid(s0, std::log(R_max), ds, 3e-4 * std::min(width, 1.0));
  const auto tr = run_log_radial(spec, dim, s0, y0, grid, opts.tol, alpha);
  sol.error_estimate = tr.error_sum;
  sol.r.push_back(sol.r_start);
  sol.u.push_back(alpha + y0[0]);
  sol.du.push_back(y0[1] / sol.r_start);
  for (std::size_t i = 0; i < tr.s.size(); ++i) {
    const double r = std::exp(tr.s[i]);
    sol.r.push_back(r);
    sol.u.push_back(tr.u[i]);
    sol.du.push_back(tr.v[i] / r);
  }
  if (tr.s_vanish) {
    sol.vanished_at = std::exp(*tr.s_vanish);
  } else {
    sol.r.back() = R_max;
  }
  return sol;
}

RegularCrossCheck cross_check_regular(const SingularSolutionTable& table, double r_hi) {
  RegularCrossCheck out;
  out.alpha = 2.0 * table.seed.u;
  out.r_hi = std::min(r_hi, table.r_end());
  const auto reg = integrate_regular(table.spec, table.dim, out.alpha, out.r_hi);
  out.min_gap = std::numeric_limits<double>::infinity();
  out.max_gap = -std::numeric_limits<double>::infinity();
  double prev = 0.0;
  for (std::size_t i = 0; i < reg.r.size(); ++i) {
    const double r = reg.r[i];
    if (r < table.r_patch || r > out.r_hi) continue;
    const double us = table.value(r);
    const double gap = (reg.u[i] - us) / us;
    out.min_gap = std::min(out.min_gap, gap);
    out.max_gap = std::max(out.max_gap, gap);
    if (gap != 0.0) {
      if (prev != 0.0 && (gap > 0.0) != (prev > 0.0)) ++out.sign_changes;
      prev = gap;
    }
  }
  return out;
}

double ode_residual(const Nonlinearity& spec, int dim, const std::vector<double>& r,
                    const std::vector<double>& u) {
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < r.size(); ++i) {
    if (u[i - 1] <= 0.0 || u[i] <= 0.0 || u[i + 1] <= 0.0) continue;
    const double h1 = r[i] - r[i - 1];
    const double h2 = r[i + 1] - r[i];
    const double d1 = -h2 / (h1 * (h1 + h2)) * u[i - 1] + (h2 - h1) / (h1 * h2) * u[i] +
                      h1 / (h2 * (h1 + h2)) * u[i + 1];
    const double d2 =
        2.0 * (u[i - 1] / (h1 * (h1 + h2)) - u[i] / (h1 * h2) + u[i + 1] / (h2 * (h1 + h2)));
    const double drift = (dim - 1.0) / r[i] * d1;
    const double src = std::exp(spec.g(u[i]));
    const double res = d2 + drift + src;
    const double scale = std::max({std::abs(d2), std::abs(drift), std::abs(src)});
    if (scale > 0.0) worst = std::max(worst, std::abs(res) / scale);
  }
  return worst;
}

FluxReport verify_flux_identity(const SingularSolutionTable& table) {
  std::vector<double> s{std::log(table.seed.r)};
  std::vector<double> u{table.seed.u};
  std::vector<double> v{table.seed.v};
  for (std::size_t i = 0; i < table.r.size(); ++i) {
    s.push_back(std::log(table.r[i]));
    u.push_back(table.u[i]);
    v.push_back(table.r[i] * table.du[i]);
  }
  const auto acc = cumulative_flux(table.spec, table.dim, s, u, v);
  FluxReport rep;
  for (std::size_t i = 0; i < s.size(); ++i) {
    // -r^{N-1} u' = -r^{N-2} v.
    const double lhs = -std::exp((table.dim - 2.0) * s[i]) * v[i];
    const double rhs = table.patch_flux + acc[i];
    const double rel = std::abs(lhs - rhs) / std::abs(rhs);
    if (i == 0) rep.residual_at_patch = rel;
    if (rel > rep.max_residual) {
      rep.max_residual = rel;
      rep.worst_r = std::exp(s[i]);
    }
  }
  return rep;
}

PohozaevTrace trace_pohozaev(const SingularSolutionTable& table, int stride) {
  if (stride < 1) throw std::invalid_argument("stride must be positive");
  PohozaevTrace tr;
  const int n = table.dim;
  std::vector<double> scale;
  auto add = [&](double r, double u, double v) {
    const double w = std::pow(r, n - 2.0);
    const double t1 = 0.5 * v * v;
    const double t2 = u > 0.0 ? std::exp(2.0 * std::log(r) + table.spec.g(u)) *
                                    scaled_F0(table.spec, u)
                              : 0.0;
    const double t3 = 0.5 * (n - 2.0) * u * v;
    tr.r.push_back(r);
    tr.P.push_back(w * (t1 + t2 + t3));
    scale.push_back(w * (std::abs(t1) + std::abs(t2) + std::abs(t3)));
  };
  add(table.seed.r, table.seed.u, table.seed.v);
  for (std::size_t i = 0; i < table.r.size(); i += stride) {
    add(table.r[i], table.u[i], table.r[i] * table.du[i]);
  }
  tr.P_at_patch = tr.P.front();
  tr.max_slope = -std::numeric_limits<double>::infinity();
  tr.max_relative_slope = -std::numeric_limits<double>::infinity();
  const double big = *std::max_element(scale.begin(), scale.end());
  for (std::size_t i = 0; i < tr.P.size(); ++i) {
    tr.relative_variation = std::max(tr.relative_variation, std::abs(tr.P[i] - tr.P[0]) / big);
    if (i == 0) continue;
    const double dr = tr.r[i] - tr.r[i - 1];
    const double slope = (tr.P[i] - tr.P[i - 1]) / dr;
    tr.max_slope = std::max(tr.max_slope, slope);
    const double slope_scale = 0.5 * (scale[i] + scale[i - 1]) / tr.r[i - 1];
    tr.max_relative_slope = std::max(tr.max_relative_slope, slope / slope_scale);
  }
  return tr;
}

const BoundCheck& BoundReport::check(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return c;
  }
  throw std::out_of_range("no bound check " + name);
}

nlohmann::json BoundReport::to_json() const {
  nlohmann::json j;
  j["delta"] = delta;
  j["fit_window"] = {fit_r_min, fit_r_max};
  j["gamma0"] = gamma0;
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    j["checks"].push_back(
        {{"name", c.name}, {"C", c.C}, {"slope", c.slope}, {"holds", c.holds}, {"detail", c.detail}});
  }
  return j;
}

// Slopes this close to zero are rounding noise on an exactly flat envelope.
constexpr double kFlatSlope = 1e-6;

BoundReport verify_growth_bounds(const SingularSolutionTable& table, double delta) {
  const int n = table.dim;
  if (!(delta > 0.0) || !(delta < 0.5 * (n - 2.0))) {
    throw std::invalid_argument("delta must lie in (0, (N-2)/2)");
  }
  BoundReport rep;
  rep.delta = delta;
  rep.fit_r_min = table.r.front();
  rep.fit_r_max = 10.0 * table.r.front();
  std::vector<std::size_t> window;
  for (std::size_t i = 0; i < table.r.size(); ++i) {
    if (table.r[i] <= rep.fit_r_max && table.u[i] > 0.0) window.push_back(i);
  }
  if (window.size() < 3) throw std::invalid_argument("table too short to fit the bounds");
  std::vector<double> L;
  for (std::size_t i : window) L.push_back(-std::log(table.r[i]));

  // y is the log of the quantity times the compensating power of r; an upper
  // bound needs y non-increasing toward the origin, a lower bound the reverse.
  auto fit = [&](const std::string& name, auto&& y_of, bool upper, const std::string& detail) {
    std::vector<double> y;
    for (std::size_t i : window) y.push_back(y_of(i));
    BoundCheck c;
    c.name = name;
    c.slope = least_squares_slope(L, y);
    c.C = std::exp(upper ? *std::max_element(y.begin(), y.end())
                         : *std::min_element(y.begin(), y.end()));
    c.holds = upper ? c.slope <= kFlatSlope : c.slope >= -kFlatSlope;
    c.detail = detail;
    rep.checks.push_back(c);
  };
  const auto& spec = table.spec;
  fit("u_upper", [&](std::size_t i) { return std::log(table.u[i]) + 2 * delta * std::log(table.r[i]); },
      true, "u* <= C r^{-2 delta}");
  fit("du_upper",
      [&](std::size_t i) {
        return std::log(std::abs(table.du[i])) + (1 + 2 * delta) * std::log(table.r[i]);
      },
      true, "|u*'| <= C r^{-1-2 delta}");
  fit("f_lower",
      [&](std::size_t i) { return spec.g(table.u[i]) + (2 - 2 * delta) * std::log(table.r[i]); },
      false, "f(u*) >= C r^{-2+2 delta}");
  for (double g1 : {0.5, 0.9}) {
    char name[32];
    std::snprintf(name, sizeof name, "f_gamma1_%.1f", g1);
    fit(name,
        [&](std::size_t i) { return spec.g(g1 * table.u[i]) + 2 * g1 * std::log(table.r[i]); },
        true, "f(gamma1 u*) <= C r^{-2 gamma1}");
  }
  {
    BoundCheck c;
    c.name = "gamma0";
    double worst = 0.0;
    for (std::size_t i : window) {
      const double u = table.u[i];
      const double ratio = u > delta ? std::exp(spec.log_ratio(u, -delta)) : 0.0;
      worst = std::max(worst, ratio);
    }
    rep.gamma0 = worst;
    c.C = worst;
    c.holds = worst < 1.0;
    c.detail = "f(u* - delta) <= gamma0 f(u*) with gamma0 < 1";
    rep.checks.push_back(c);
  }
  return rep;
}

std::vector<std::pair<double, double>> asymptotic_ratio(const SingularSolutionTable& table,
                                                        double r_lo, double r_hi) {
  std::vector<std::pair<double, double>> out;
  const double c = std::log(2.0 * table.dim - 4.0);
  for (std::size_t i = 0; i < table.r.size(); ++i) {
    const double r = table.r[i];
    if (r < r_lo || r > r_hi || table.u[i] <= 0.0) continue;
    out.emplace_back(r, std::exp(log_F(table.spec, table.u[i], table.barrier) + c - 2.0 * std::log(r)));
  }
  return out;
}

}  // namespace stlab
