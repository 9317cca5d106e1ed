#include "ellipq/residues.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>

#include "ellipq/elliptic.hpp"
#include "ellipq/errors.hpp"
#include "ellipq/util.hpp"

namespace ellipq {
namespace {

constexpr double kShrink = 1.0 / 3.0;  // per-level contraction of nested radii
constexpr double kMinRadius = 1e-10;   // below this no meaningful contour fits
constexpr int kMaxDepth = 4;           // nested quadrature cost cap

std::string fmt(cplx v) {
  std::ostringstream os;
  os << "(" << v.real() << (v.imag() < 0 ? "" : "+") << v.imag() << "i)";
  return os.str();
}

bool bad_sample(cplx v, double hit_threshold) {
  return !std::isfinite(v.real()) || !std::isfinite(v.imag()) ||
         std::abs(v) > hit_threshold;
}

// Per-level radii: each capped by half the lattice distance to the nearest
// distinct catalog point and by kShrink times the enclosing level's radius
// (the adjacent outer variable's moving pole circles the inner centre at
// exactly the outer radius, so strict shrinking keeps it outside).
std::vector<double> plan_radii(const ThetaEngine& eng, const std::vector<cplx>& pins,
                               const std::vector<cplx>& catalog, double base,
                               const std::string& context) {
  std::vector<double> radii(pins.size());
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < pins.size(); ++v) {
    double safe = std::numeric_limits<double>::infinity();
    for (const cplx& c : catalog) {
      const double d = eng.lattice_distance(pins[v] - c);
      if (d > 1e-12) safe = std::min(safe, d);
    }
    double rho = std::min(base, 0.5 * safe);
    rho = std::min(rho, kShrink * prev);
    if (!(rho > kMinRadius)) {
      throw ContourError(context + ": no safe contour radius around pin " +
                         fmt(pins[v]) + " (nearest foreign pole at distance " +
                         std::to_string(safe) + ")");
    }
    radii[v] = rho;
    prev = rho;
  }
  return radii;
}

struct NestedPlan {
  std::vector<int> vars;      // 0-based argument slot per level, outermost first
  std::vector<cplx> pins;     // contour centre per level
  std::vector<double> radii;  // contour radius per level
  int points = 32;
  double hit_threshold = 1e12;
};

// Trapezoid sweep over all planned contours; exact for the a_{-1} Laurent
// coefficient at the centre regardless of pole order.  `t` carries the full
// argument vector (free slots already filled by the caller).
std::vector<cplx> nested_sweep(const VFunc& f, std::vector<cplx>& t,
                               const NestedPlan& plan, std::size_t level) {
  if (level == plan.vars.size()) {
    std::vector<cplx> vals = f(t);
    for (const cplx& v : vals) {
      if (bad_sample(v, plan.hit_threshold)) {
        throw ContourError("contour sample magnitude " + std::to_string(std::abs(v)) +
                           " exceeds the pole-hit threshold");
      }
    }
    return vals;
  }
  const int points = plan.points;
  const cplx centre = plan.pins[level];
  const double rho = plan.radii[level];
  std::vector<cplx> acc;
  for (int k = 0; k < points; ++k) {
    const cplx off = std::polar(rho, kTwoPi * static_cast<double>(k) / points);
    t[static_cast<std::size_t>(plan.vars[level])] = centre + off;
    const std::vector<cplx> inner = nested_sweep(f, t, plan, level + 1);
    if (acc.empty()) acc.assign(inner.size(), cplx(0.0));
    for (std::size_t i = 0; i < inner.size(); ++i) acc[i] += inner[i] * off;
  }
  for (cplx& v : acc) v /= static_cast<double>(points);
  return acc;
}

void check_spec(const ContourSpec& spec) {
  if (spec.points < 4) throw ConfigError("a contour needs at least four sample points");
  if (!(spec.radius > 0.0)) throw ConfigError("the contour radius must be positive");
}

// Staircase points z + a - 2*eta*s for s = -1..depth; every pin and every
// adjacent moving-pole location of a single-site staircase lies on it.
void append_site_staircase(std::vector<cplx>& catalog, cplx z, cplx a, cplx two_eta,
                           int depth) {
  for (int s = -1; s <= depth; ++s) {
    catalog.push_back(z + a - two_eta * static_cast<double>(s));
  }
}

}  // namespace

cplx residue_1d(const Func1& f, cplx t0, const ContourSpec& spec, double scale_hint) {
  check_spec(spec);
  const int fine = 2 * spec.points;
  const double hit = 1e12 * scale_hint;
  cplx sum_fine(0.0);
  cplx sum_coarse(0.0);
  for (int k = 0; k < fine; ++k) {
    const cplx off = std::polar(spec.radius, kTwoPi * static_cast<double>(k) / fine);
    const cplx v = f(t0 + off);
    if (bad_sample(v, hit)) {
      throw ContourError("contour sample at " + fmt(t0 + off) +
                         " hits a pole (|f| threshold " + std::to_string(hit) + ")");
    }
    const cplx term = v * off;
    sum_fine += term;
    if (k % 2 == 0) sum_coarse += term;
  }
  const cplx res_fine = sum_fine / static_cast<double>(fine);
  const cplx res_coarse = sum_coarse / static_cast<double>(spec.points);
  const double diff = std::abs(res_fine - res_coarse);
  const double rel_floor =
      1e-8 * std::max(std::abs(res_fine), std::abs(res_coarse));
  // Near-zero residues (regular points, even Laurent parts) pass on the
  // absolute floor; genuine unresolved poles move the estimate far past both.
  if (diff > rel_floor && diff > 1e-10 * scale_hint) {
    throw AdaptivityFailure("doubling the contour points moved the residue at " +
                            fmt(t0) + " by " + std::to_string(diff) +
                            " (unresolved pole inside or near the contour)");
  }
  return res_fine;
}

StaircasePlan plan_staircase(const ModelConfig& config, const Composition& comp,
                             const ContourSpec& spec) {
  check_spec(spec);
  const int n = config.n();
  if (static_cast<int>(comp.size()) != n) {
    throw ConfigError("composition must have one part per tensor factor");
  }
  const int m = comp.total();
  const cplx two_eta = 2.0 * config.eta();
  StaircasePlan plan;
  plan.pins.resize(static_cast<std::size_t>(m));
  int v = 0;
  for (int l = 0; l < n; ++l) {
    const int ml = comp.parts[static_cast<std::size_t>(l)];
    for (int r = 1; r <= ml; ++r, ++v) {
      plan.pins[static_cast<std::size_t>(v)] =
          config.z[static_cast<std::size_t>(l)] + config.a(l) -
          two_eta * static_cast<double>(ml - r);
    }
  }
  ThetaEngine eng(config.elliptic.tau);
  std::vector<cplx> catalog;
  for (int k = 0; k < n; ++k) {
    append_site_staircase(catalog, config.z[static_cast<std::size_t>(k)], config.a(k),
                          two_eta, m);
  }
  plan.radii = plan_radii(eng, plan.pins, catalog, spec.radius, "staircase " + comp.str());
  return plan;
}

std::vector<cplx> res_iterated_vec(const ModelConfig& config, const VFunc& f,
                                   std::size_t width, const Composition& comp,
                                   const ContourSpec& spec) {
  config.validate();
  check_spec(spec);
  const int m = comp.total();
  if (m > kMaxDepth) {
    throw DepthLimit("iterated residues support at most " + std::to_string(kMaxDepth) +
                     " variables, got " + std::to_string(m));
  }
  std::vector<cplx> t(static_cast<std::size_t>(m));
  if (m == 0) {
    std::vector<cplx> vals = f(t);
    if (vals.size() != width) throw ConfigError("batch integrand width mismatch");
    return vals;
  }
  const StaircasePlan sp = plan_staircase(config, comp, spec);
  ThetaEngine eng(config.elliptic.tau);
  NestedPlan plan;
  plan.vars.resize(static_cast<std::size_t>(m));
  for (int v = 0; v < m; ++v) plan.vars[static_cast<std::size_t>(v)] = v;
  plan.pins = sp.pins;
  plan.radii = sp.radii;
  plan.points = spec.points;
  plan.hit_threshold = 1e12 * std::max(1.0, eng.scale());
  std::vector<cplx> vals = nested_sweep(f, t, plan, 0);
  if (vals.size() != width) throw ConfigError("batch integrand width mismatch");
  return vals;
}

cplx res_iterated(const ModelConfig& config, const TFunc& f, const Composition& comp,
                  const ContourSpec& spec) {
  const VFunc vf = [&f](const std::vector<cplx>& t) {
    return std::vector<cplx>{f(t)};
  };
  return res_iterated_vec(config, vf, 1, comp, spec)[0];
}

cplx res_tilde(const EllipticParams& params, const TFunc& f, int k, int m, cplx z,
               cplx a, cplx lambda, const ContourSpec& spec) {
  params.validate();
  check_spec(spec);
  if (m < 0 || k < 0 || k > m) {
    throw ConfigError("coinciding-point functional label requires 0 <= k <= m");
  }
  if (m > kMaxDepth) {
    throw DepthLimit("iterated residues support at most " + std::to_string(kMaxDepth) +
                     " variables, got " + std::to_string(m));
  }
  std::vector<cplx> t(static_cast<std::size_t>(m));
  if (m == 0) return f(t);

  const cplx two_eta = 2.0 * params.eta;
  const cplx top = z + a;
  std::vector<cplx> pins(static_cast<std::size_t>(m));
  if (k == m) {
    for (int r = 1; r <= m; ++r) {
      pins[static_cast<std::size_t>(r - 1)] = top - two_eta * static_cast<double>(m - r);
    }
  } else {
    for (int r = 1; r <= k; ++r) {
      pins[static_cast<std::size_t>(r - 1)] = top - two_eta * static_cast<double>(k - r);
    }
    for (int s = 1; s <= m - k; ++s) {
      pins[static_cast<std::size_t>(k + s - 1)] =
          top - two_eta * static_cast<double>(m - k - s);
    }
  }
  ThetaEngine eng(params.tau);
  std::vector<cplx> catalog;
  append_site_staircase(catalog, z, a, two_eta, m);
  const std::string context = "coinciding-point functional (" + std::to_string(k) + "," +
                              std::to_string(m - k) + ") at lambda=" + fmt(lambda);
  NestedPlan plan;
  plan.vars.resize(static_cast<std::size_t>(m));
  for (int v = 0; v < m; ++v) plan.vars[static_cast<std::size_t>(v)] = v;
  plan.pins = pins;
  plan.radii = plan_radii(eng, pins, catalog, spec.radius, context);
  plan.points = spec.points;
  plan.hit_threshold = 1e12 * std::max(1.0, eng.scale());

  const bool with_factor = (k < m);
  const std::size_t last = static_cast<std::size_t>(m - 1);
  const VFunc vf = [&f, with_factor, top, last](const std::vector<cplx>& tt) {
    cplx v = f(tt);
    if (with_factor) v *= (tt[last] - top);
    return std::vector<cplx>{v};
  };
  return nested_sweep(vf, t, plan, 0)[0];
}

TFunc res_resonance(const EllipticParams& params, const TFunc& f, int m, cplx u,
                    int ell, const ContourSpec& spec) {
  params.validate();
  check_spec(spec);
  if (m < 0) throw ConfigError("the variable count must be nonnegative");
  if (ell < 0) throw ConfigError("the staircase depth must be nonnegative");
  if (ell >= m) {
    return [](const std::vector<cplx>&) { return cplx(0.0); };
  }
  const int npin = ell + 1;
  if (npin > kMaxDepth) {
    throw DepthLimit("iterated residues support at most " + std::to_string(kMaxDepth) +
                     " variables, got " + std::to_string(npin));
  }
  const cplx two_eta = 2.0 * params.eta;
  ThetaEngine eng(params.tau);
  NestedPlan plan;
  plan.vars.resize(static_cast<std::size_t>(npin));
  plan.pins.resize(static_cast<std::size_t>(npin));
  for (int i = 0; i < npin; ++i) {
    // level i pins t_{m-ell+i} (outermost first); the innermost level is t_m at u.
    plan.vars[static_cast<std::size_t>(i)] = m - npin + i;
    plan.pins[static_cast<std::size_t>(i)] = u - two_eta * static_cast<double>(ell - i);
  }
  std::vector<cplx> catalog;
  append_site_staircase(catalog, u, cplx(0.0), two_eta, m);
  plan.radii = plan_radii(eng, plan.pins, catalog, spec.radius,
                          "partial staircase at " + fmt(u));
  plan.points = spec.points;
  plan.hit_threshold = 1e12 * std::max(1.0, eng.scale());

  const std::size_t nfree = static_cast<std::size_t>(m - npin);
  return [f, plan, eng, two_eta, nfree, m](const std::vector<cplx>& rest) {
    if (rest.size() != nfree) {
      throw ConfigError("expected " + std::to_string(nfree) + " free arguments, got " +
                        std::to_string(rest.size()));
    }
    for (std::size_t i = 0; i < nfree; ++i) {
      for (std::size_t v = 0; v < plan.pins.size(); ++v) {
        const double guard = 2.0 * plan.radii[v];
        if (eng.lattice_distance(rest[i] - plan.pins[v]) <= guard ||
            eng.lattice_distance(rest[i] + two_eta - plan.pins[v]) <= guard) {
          throw ContourError("free argument " + fmt(rest[i]) +
                             " sits on or moves a pole onto a pinned contour");
        }
      }
    }
    std::vector<cplx> t(static_cast<std::size_t>(m));
    std::copy(rest.begin(), rest.end(), t.begin());
    const VFunc vf = [&f](const std::vector<cplx>& tt) {
      return std::vector<cplx>{f(tt)};
    };
    return nested_sweep(vf, t, plan, 0)[0];
  };
}

cplx res_pairing_diagonal(const ModelConfig& config, const Composition& comp,
                          cplx lambda) {
  config.validate();
  const int n = config.n();
  if (static_cast<int>(comp.size()) != n) {
    throw ConfigError("composition must have one part per tensor factor");
  }
  ThetaEngine eng(config.elliptic.tau);
  const cplx two_eta = 2.0 * config.eta();
  const cplx dpr = eng.theta_prime0();
  cplx val(1.0);
  for (int i = 0; i < n; ++i) {
    const cplx lam_i = lambda - two_eta * partial_weight(config, comp, i);
    for (int j = 1; j <= comp.parts[static_cast<std::size_t>(i)]; ++j) {
      val *= eng.theta(lam_i + two_eta * static_cast<double>(j)) / dpr;
    }
  }
  for (int l = 0; l < n; ++l) {
    for (int kk = l + 1; kk < n; ++kk) {
      const cplx zk = config.z[static_cast<std::size_t>(kk)];
      const cplx zl = config.z[static_cast<std::size_t>(l)];
      const cplx ak = config.a(kk);
      const cplx al = config.a(l);
      for (int j = 1; j <= comp.parts[static_cast<std::size_t>(kk)]; ++j) {
        const cplx step = two_eta * static_cast<double>(j - 1);
        val *= eng.theta(zk + ak - zl + al - step) / eng.theta(zk + ak - zl - al - step);
      }
    }
  }
  return val;
}

bool pairing_allowed(const Composition& functional, const Composition& label) {
  if (functional.size() != label.size()) {
    throw ConfigError("compositions must have equal length");
  }
  int tail_m = 0;
  int tail_j = 0;
  for (std::size_t l = functional.size(); l-- > 0;) {
    tail_m += functional.parts[l];
    tail_j += label.parts[l];
    if (tail_m > tail_j) return false;
  }
  return true;
}

PairingMatrix pairing_matrix(const OmegaEvaluator& ev, int m, cplx lambda,
                             const ContourSpec& spec) {
  const ModelConfig& config = ev.config();
  const std::vector<Composition> comps = enumerate_compositions(config.n(), m);
  const std::size_t dim = comps.size();
  PairingMatrix out;
  out.rows = comps;
  out.cols = comps;
  out.entries.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  const auto batch = ev.batch_handle(m, lambda);
  parallel_for(dim, [&](std::size_t r) {
    const std::vector<cplx> row = res_iterated_vec(config, batch, dim, comps[r], spec);
    for (std::size_t c = 0; c < dim; ++c) {
      out.entries(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
  });
  return out;
}

}  // namespace ellipq
