#include "stlab/threshold_lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>
#include <stdexcept>

#include "stlab/barrier.hpp"
#include "stlab/errors.hpp"

namespace stlab {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json num(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

PerturbationSpec PerturbationSpec::bump(double r_c, double sigma, double amplitude) {
  if (!(sigma > 0.0)) throw std::invalid_argument("bump width must be positive");
  Step s;
  s.kind = Kind::RadialBump;
  s.r_c = r_c;
  s.sigma = sigma;
  s.amplitude = amplitude;
  return {{s}};
}

PerturbationSpec PerturbationSpec::scaling(double theta) {
  if (!(theta >= 0.0)) throw std::invalid_argument("scaling factor must be nonnegative");
  Step s;
  s.kind = Kind::Scaling;
  s.factor = theta;
  return {{s}};
}

PerturbationSpec PerturbationSpec::truncation(double cap) {
  if (!(cap > 0.0)) throw std::invalid_argument("truncation level must be positive");
  Step s;
  s.kind = Kind::Truncation;
  s.cap = cap;
  return {{s}};
}

PerturbationSpec PerturbationSpec::then(const PerturbationSpec& next) const {
  PerturbationSpec out = *this;
  out.steps.insert(out.steps.end(), next.steps.begin(), next.steps.end());
  return out;
}

std::string PerturbationSpec::describe() const {
  if (steps.empty()) return "identity";
  std::ostringstream os;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    if (i) os << " then ";
    switch (s.kind) {
      case Kind::RadialBump:
        os << "bump(r_c=" << s.r_c << ",sigma=" << s.sigma << ",A=" << s.amplitude << ")";
        break;
      case Kind::Scaling:
        os << "scaling(" << s.factor << ")";
        break;
      case Kind::Truncation:
        os << "truncation(" << s.cap << ")";
        break;
    }
  }
  return os.str();
}

nlohmann::json PerturbationSpec::to_json() const {
  auto arr = nlohmann::json::array();
  for (const auto& s : steps) {
    switch (s.kind) {
      case Kind::RadialBump:
        arr.push_back({{"kind", "radial_bump"}, {"r_c", s.r_c}, {"sigma", s.sigma},
                       {"amplitude", s.amplitude}});
        break;
      case Kind::Scaling:
        arr.push_back({{"kind", "scaling"}, {"factor", s.factor}});
        break;
      case Kind::Truncation:
        arr.push_back({{"kind", "truncation"}, {"cap", num(s.cap)}});
        break;
    }
  }
  return arr;
}

std::string to_string(Side s) {
  switch (s) {
    case Side::Below: return "below";
    case Side::Above: return "above";
    case Side::Neutral: return "neutral";
    case Side::Mixed: return "mixed";
  }
  return "mixed";
}

std::string to_string(Classification c) {
  switch (c) {
    case Classification::GlobalBounded: return "GlobalBounded";
    case Classification::BlowUp: return "BlowUp";
    case Classification::Undetermined: return "Undetermined";
  }
  return "Undetermined";
}

InitialData make_initial_data(const SingularSolutionTable& table, const RadialGrid& grid,
                              const PerturbationSpec& pert, double cap) {
  InitialData d;
  d.cap = cap;
  d.ustar_raw = sample_singular(table, grid, std::numeric_limits<double>::infinity());
  d.ustar = sample_singular(table, grid, cap);
  const auto& r = d.ustar.grid.r;
  std::vector<double> v = d.ustar_raw.values;
  bool down = false, up = false;
  for (const auto& s : pert.steps) {
    switch (s.kind) {
      case PerturbationSpec::Kind::RadialBump:
        for (std::size_t i = 0; i < v.size(); ++i) {
          const double x = (r[i] - s.r_c) / s.sigma;
          v[i] += s.amplitude * std::exp(-0.5 * x * x);
        }
        if (s.amplitude < 0.0) down = true;
        if (s.amplitude > 0.0) up = true;
        break;
      case PerturbationSpec::Kind::Scaling:
        for (double& x : v) x *= s.factor;
        if (s.factor < 1.0) down = true;
        if (s.factor > 1.0) up = true;
        break;
      case PerturbationSpec::Kind::Truncation:
        for (double& x : v) x = std::min(x, s.cap);
        down = true;
        break;
    }
  }
  d.side = down && up ? Side::Mixed : down ? Side::Below : up ? Side::Above : Side::Neutral;
  d.u0 = d.ustar;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = std::min(cap, std::max(0.0, v[i]));
    d.u0.values[i] = x;
    d.u0.cap_mask[i] = v[i] > cap ? 1 : 0;
  }
  // The outer node keeps the Dirichlet value of u*.
  d.u0.values.back() = d.ustar.values.back();
  return d;
}

nlohmann::json EvolutionOutcome::to_json() const {
  nlohmann::json s = nlohmann::json::array();
  for (const auto& x : series) s.push_back({x.t, x.sup, x.l1ul, x.mass});
  return {{"classification", to_string(classification)},
          {"t_detect", num(t_detect)},
          {"cap", cap},
          {"sup_guard", sup_guard},
          {"m0", m0},
          {"steps", steps},
          {"t_end", t_end},
          {"above_ustar_max", num(above_ustar_max)},
          {"note", note},
          {"series_columns", {"t", "sup_norm", "l1ul_norm", "f_mass_inner"}},
          {"series", s}};
}

void EvolutionOutcome::write_norms_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "t,sup_norm,l1ul_norm,f_mass_inner\n";
  for (const auto& x : series) {
    os << fmt17(x.t) << ',' << fmt17(x.sup) << ',' << fmt17(x.l1ul) << ',' << fmt17(x.mass) << '\n';
  }
}

EvolutionOutcome evolve(const InitialData& data, const Nonlinearity& spec,
                        const EvolutionOptions& opts) {
  if (!(opts.T > 0.0) || !(opts.safety > 0.0) || !(opts.dt_floor > 0.0)) {
    throw std::invalid_argument("bad evolution options");
  }
  const RadialGrid& grid = data.ustar.grid;
  const std::size_t n = grid.r.size();
  const auto& us = data.ustar.values;
  const auto vol = grid.control_volumes();
  const double area = sphere_area(grid.dim - 1);
  const std::size_t inner = std::min<std::size_t>(std::max(1, opts.inner_cells), n);
  const RadialLaplacian L(grid);

  EvolutionOutcome out;
  out.cap = data.cap;
  out.sup_guard = opts.sup_guard > 0.0
                      ? opts.sup_guard
                      : std::min(1e8, eval_F_inverse(spec, 100.0 * opts.dt_floor));

  auto reaction_mass = [&](const std::vector<double>& u) {
    double m = 0.0;
    for (std::size_t i = 0; i < inner; ++i) m += area * vol[i] * spec.f(u[i]);
    return m;
  };
  const bool react = opts.reaction;
  // u*_h is only stationary with the reaction switched on.
  const bool balanced = opts.balanced && react;
  std::vector<double> u = data.u0.values;
  // Deviation from u*_h; the outer node stays pinned at d = 0.
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = u[i] - us[i];
  RadialGrid dev_grid = grid;
  dev_grid.bc = OuterBC::Dirichlet;
  dev_grid.outer_value = 0.0;
  std::vector<double> fus(n);
  if (react) {
    for (std::size_t i = 0; i < n; ++i) fus[i] = spec.f(us[i]);
  }

  out.m0 = reaction_mass(u);
  const double t_transient = opts.transient_fraction * opts.T;
  const double sup_ref = *std::max_element(us.begin(), us.end());

  auto record = [&](double t) {
    RadialField f = data.ustar;
    f.values = u;
    std::fill(f.cap_mask.begin(), f.cap_mask.end(), 0);
    NormSample s;
    s.t = t;
    s.sup = f.sup();
    f.grid.bc = OuterBC::Neumann;
    s.l1ul = ul_norm(f, 1.0).value;
    s.mass = reaction_mass(u);
    out.series.push_back(s);
    f.grid = grid;
    out.snapshot_times.push_back(t);
    out.snapshots.push_back(std::move(f));
  };
  auto track_side = [&]() {
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (us[i] > 0.0) out.above_ustar_max = std::max(out.above_ustar_max, (u[i] - us[i]) / us[i]);
    }
  };

  const int snaps = std::max(1, opts.snapshots);
  int next_snap = 1;
  double t = 0.0;
  record(0.0);
  track_side();
  double prev_sup = *std::max_element(u.begin(), u.end());
  bool nonincreasing = true;
  bool stopped = false;
  const double dt_cap = opts.dt_max_fraction * opts.T;

  while (t < opts.T * (1.0 - 1e-14)) {
    const double sup = *std::max_element(u.begin(), u.end());
    double dt = dt_cap;
    if (react) dt = std::min(dt, 1.0 / (spec.df(sup) + 1e-300));
    dt *= opts.safety;
    const double m = reaction_mass(u);
    if (!(dt >= opts.dt_floor) || !std::isfinite(sup)) {
      stopped = true;
      const bool diverged = sup > out.sup_guard && m > opts.mass_growth * out.m0;
      out.classification = diverged ? Classification::BlowUp : Classification::Undetermined;
      if (diverged) out.t_detect = t;
      out.note = diverged ? "dt underflow with sup and inner mass past their guards"
                          : "dt underflow without divergence of sup and inner mass";
      break;
    }
    dt = std::min(dt, opts.T - t);
    try {
      if (balanced) {
        std::vector<double> rhs = d;
        if (react) {
          for (std::size_t i = 0; i < n; ++i) rhs[i] += dt * spec.difference(u[i], us[i]);
          if (!std::isfinite(spec.f(sup))) throw ReactionOverflow("f(sup u) overflows");
        }
        d = implicit_diffusion_solve(L, dev_grid, dt, std::move(rhs));
        for (std::size_t i = 0; i < n; ++i) {
          d[i] = std::max(d[i], -us[i]);
          u[i] = us[i] + d[i];
        }
      } else {
        RadialField f = data.ustar;
        f.values = u;
        ImexOptions io;
        io.reaction = react;
        u = step_imex(f, spec, dt, io).values;
        for (std::size_t i = 0; i < n; ++i) d[i] = u[i] - us[i];
      }
    } catch (const ReactionOverflow&) {
      stopped = true;
      const bool diverged = sup > out.sup_guard && m > opts.mass_growth * out.m0;
      out.classification = diverged ? Classification::BlowUp : Classification::Undetermined;
      if (diverged) out.t_detect = t;
      out.note = "reaction overflow";
      break;
    }
    t += dt;
    ++out.steps;
    track_side();
    const double now = *std::max_element(u.begin(), u.end());
    if (t > t_transient && now > prev_sup * (1.0 + 1e-12) + 1e-300) nonincreasing = false;
    prev_sup = now;
    while (next_snap <= snaps && t >= opts.T * next_snap / snaps * (1.0 - 1e-12)) {
      record(t);
      ++next_snap;
    }
  }
  out.t_end = t;
  if (out.series.empty() || out.series.back().t < t) record(t);
  out.final_field = out.snapshots.back();
  if (!stopped) {
    const double sup_final = out.series.back().sup;
    if (nonincreasing && sup_final < (1.0 - 1e-9) * sup_ref) {
      out.classification = Classification::GlobalBounded;
      out.note = "sup norm nonincreasing after the transient and below sup u*_h";
    } else {
      out.classification = Classification::Undetermined;
      out.note = nonincreasing ? "reached the horizon at the level of u*_h"
                               : "reached the horizon with sup norm still growing";
    }
  }
  return out;
}

nlohmann::json CaseReport::to_json() const {
  auto caps = nlohmann::json::array();
  for (const auto& o : per_cap) caps.push_back(o.to_json());
  return {{"perturbation", pert.to_json()},
          {"description", pert.describe()},
          {"side", to_string(side)},
          {"classification", to_string(classification)},
          {"cap_stable", cap_stable},
          {"t_detect_monotone", t_detect_monotone},
          {"per_cap", caps}};
}

CaseReport run_case(const Nonlinearity& spec, const SingularSolutionTable& table,
                    const RadialGrid& grid, const PerturbationSpec& pert,
                    const std::vector<double>& caps, const EvolutionOptions& opts) {
  if (caps.empty()) throw std::invalid_argument("need at least one cap");
  CaseReport rep;
  rep.pert = pert;
  std::vector<double> sorted = caps;
  std::sort(sorted.begin(), sorted.end());
  for (double cap : sorted) {
    const InitialData data = make_initial_data(table, grid, pert, cap);
    rep.side = data.side;
    rep.per_cap.push_back(evolve(data, spec, opts));
  }
  rep.cap_stable = std::all_of(rep.per_cap.begin(), rep.per_cap.end(), [&](const auto& o) {
    return o.classification == rep.per_cap.front().classification;
  });
  rep.classification =
      rep.cap_stable ? rep.per_cap.front().classification : Classification::Undetermined;
  if (rep.classification == Classification::BlowUp) {
    for (std::size_t k = 1; k < rep.per_cap.size(); ++k) {
      if (rep.per_cap[k].t_detect > rep.per_cap[k - 1].t_detect * (1.0 + 1e-9)) {
        rep.t_detect_monotone = false;
      }
    }
  }
  return rep;
}

std::vector<AmplificationSample> amplification_probe(const EvolutionOutcome& outcome,
                                                     const RadialField& ustar_raw) {
  std::vector<AmplificationSample> out;
  const auto& r = ustar_raw.grid.r;
  if (r.size() < 2) return out;
  const double r_hi = 10.0 * r[1];
  for (std::size_t k = 0; k < outcome.snapshots.size(); ++k) {
    const auto& u = outcome.snapshots[k].values;
    double alpha = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < r.size() && r[i] <= r_hi * (1.0 + 1e-12); ++i) {
      alpha = std::min(alpha, u[i] / ustar_raw.values[i]);
    }
    out.push_back({outcome.snapshot_times[k], alpha});
  }
  return out;
}

std::vector<Classification> ScanReport::classifications() const {
  std::vector<Classification> c;
  for (const auto& row : rows) c.push_back(row.report.classification);
  return c;
}

nlohmann::json ScanReport::to_json() const {
  auto arr = nlohmann::json::array();
  for (const auto& row : rows) {
    arr.push_back({{"factor", row.factor}, {"amplitude", row.amplitude}, {"case", row.report.to_json()}});
  }
  return {{"r_c", r_c},
          {"sigma", sigma},
          {"ustar_rc", ustar_rc},
          {"caps", caps},
          {"a_lower", num(a_lower)},
          {"a_upper", num(a_upper)},
          {"blowup_time_monotone", blowup_time_monotone},
          {"rows", arr}};
}

void ScanReport::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "amplitude,classification,t_detect,cap,sup_final,reaction_mass_final\n";
  for (const auto& row : rows) {
    for (const auto& o : row.report.per_cap) {
      os << fmt17(row.amplitude) << ',' << to_string(o.classification) << ','
         << (std::isfinite(o.t_detect) ? fmt17(o.t_detect) : std::string("nan")) << ','
         << fmt17(o.cap) << ',' << fmt17(o.series.back().sup) << ',' << fmt17(o.series.back().mass)
         << '\n';
    }
  }
}

ScanReport threshold_scan(const Nonlinearity& spec, const SingularSolutionTable& table,
                          const RadialGrid& grid, double r_c, double sigma,
                          std::vector<double> factors, const std::vector<double>& caps,
                          const EvolutionOptions& opts) {
  if (factors.empty()) throw std::invalid_argument("empty amplitude grid");
  std::sort(factors.begin(), factors.end());
  ScanReport rep;
  rep.r_c = r_c;
  rep.sigma = sigma;
  rep.ustar_rc = table.value(r_c);
  rep.caps = caps;
  std::vector<std::future<CaseReport>> jobs;
  for (double fac : factors) {
    const auto pert = PerturbationSpec::bump(r_c, sigma, fac * rep.ustar_rc);
    jobs.push_back(std::async(std::launch::async, [&, pert] {
      return run_case(spec, table, grid, pert, caps, opts);
    }));
  }
  for (std::size_t k = 0; k < factors.size(); ++k) {
    rep.rows.push_back({factors[k], factors[k] * rep.ustar_rc, jobs[k].get()});
  }
  // GlobalBounded block, optional Undetermined block, BlowUp block.
  int stage = 0;
  for (const auto& row : rep.rows) {
    const auto c = row.report.classification;
    const int s = c == Classification::GlobalBounded ? 0 : c == Classification::Undetermined ? 1 : 2;
    if (s < stage) {
      throw NonMonotoneScan("classification " + to_string(c) + " at amplitude " +
                            std::to_string(row.amplitude) + " follows a later verdict");
    }
    stage = s;
    if (c == Classification::GlobalBounded) rep.a_lower = row.amplitude;
    if (c == Classification::BlowUp && !std::isfinite(rep.a_upper)) rep.a_upper = row.amplitude;
  }
  double last = std::numeric_limits<double>::infinity();
  for (const auto& row : rep.rows) {
    if (row.report.classification != Classification::BlowUp) continue;
    double t = 0.0;
    for (const auto& o : row.report.per_cap) t = std::max(t, o.t_detect);
    if (t > last * (1.0 + 1e-9)) rep.blowup_time_monotone = false;
    last = t;
  }
  return rep;
}

}  // namespace stlab
