#include "ellipq/omega.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ellipq/errors.hpp"

namespace ellipq {

namespace {

double multinomial(std::size_t m, const std::vector<int>& parts) {
  double lg = std::lgamma(static_cast<double>(m) + 1.0);
  for (int p : parts) lg -= std::lgamma(static_cast<double>(p) + 1.0);
  return std::exp(lg);
}

double factorial(std::size_t k) {
  return std::exp(std::lgamma(static_cast<double>(k) + 1.0));
}

// u(t) = prod_{i<j} theta(t_i - t_j + 2 eta) / theta(t_i - t_j).
cplx u_value(const ThetaEngine& engine, cplx two_eta,
             const std::vector<cplx>& t, double guard) {
  const double floor_num = 1e-10 * engine.scale();
  const double floor_den = guard * engine.scale();
  cplx u(1.0, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = i + 1; j < t.size(); ++j) {
      const cplx num = engine.theta(t[i] - t[j] + two_eta);
      const cplx den = engine.theta(t[i] - t[j]);
      if (std::abs(num) < floor_num)
        throw PoleProximity("u factor: theta(t_i - t_j + 2 eta) vanishes");
      if (std::abs(den) < floor_den)
        throw PoleProximity("u factor: variables collide (t_i - t_j near lattice)");
      u *= num / den;
    }
  }
  return u;
}

}  // namespace

double MembershipReport::max_dev() const {
  return std::max({period_dev, tau_multiplier_dev, sym_multiplier_dev});
}

OmegaEvaluator::OmegaEvaluator(ModelConfig config)
    : config_(std::move(config)), engine_(config_.elliptic) {
  config_.validate();
}

cplx OmegaEvaluator::u_factor(const std::vector<cplx>& t) const {
  return u_value(engine_, 2.0 * config_.eta(), t, sep_guard_);
}

cplx OmegaEvaluator::one_point(std::size_t m, const OmegaPoint& point, cplx z,
                               cplx a) const {
  if (point.t.size() != m)
    throw ConfigError("one_point: point has " + std::to_string(point.t.size()) +
                      " variables, expected " + std::to_string(m));
  if (m == 0) return cplx(1.0, 0.0);
  const cplx eta = config_.eta();
  const cplx two_eta = 2.0 * eta;
  const double floor = 1e-10 * engine_.scale();
  cplx value(1.0, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const cplx den = engine_.theta(point.t[i] - point.t[j] + two_eta);
      if (std::abs(den) < floor)
        throw PoleProximity("one_point: theta(t_i - t_j + 2 eta) too small");
      value *= engine_.theta(point.t[i] - point.t[j]) / den;
    }
  }
  const cplx shift = point.lambda + two_eta * static_cast<double>(m);
  for (std::size_t j = 0; j < m; ++j) {
    const cplx den = engine_.theta(point.t[j] - z - a);
    if (std::abs(den) < floor)
      throw PoleProximity("one_point: theta(t_j - z - a) too small");
    value *= engine_.theta(shift + point.t[j] - z - a) / den;
  }
  return value;
}

struct OmegaEvaluator::Tables {
  std::size_t m = 0;
  std::size_t n = 0;
  std::vector<cplx> rz;    // m*n: theta(t_i - z_k + a_k) / theta(t_i - z_k - a_k)
  std::vector<cplx> dlow;  // m*n: theta(t_i - z_k - a_k)
  std::vector<cplx> rt;    // m*m: theta(t_i - t_j + 2 eta) / theta(t_i - t_j), i != j
  cplx u_inv{1.0, 0.0};    // prod_{i<j} theta(t_i - t_j) / theta(t_i - t_j + 2 eta)
};

OmegaEvaluator::Tables OmegaEvaluator::make_tables(const OmegaPoint& point) const {
  Tables tab;
  tab.m = point.t.size();
  tab.n = config_.n();
  const cplx two_eta = 2.0 * config_.eta();
  const double floor = 1e-10 * engine_.scale();
  const double floor_sep = sep_guard_ * engine_.scale();

  tab.rz.resize(tab.m * tab.n);
  tab.dlow.resize(tab.m * tab.n);
  for (std::size_t i = 0; i < tab.m; ++i) {
    for (std::size_t k = 0; k < tab.n; ++k) {
      const cplx arg = point.t[i] - config_.z[k];
      const cplx den = engine_.theta(arg - config_.a(k));
      if (std::abs(den) < floor) {
        std::ostringstream os;
        os << "omega tables: theta(t_" << (i + 1) << " - z_" << (k + 1)
           << " - a_" << (k + 1) << ") too small";
        throw PoleProximity(os.str());
      }
      tab.dlow[i * tab.n + k] = den;
      tab.rz[i * tab.n + k] = engine_.theta(arg + config_.a(k)) / den;
    }
  }

  tab.rt.assign(tab.m * tab.m, cplx(0.0, 0.0));
  for (std::size_t i = 0; i < tab.m; ++i) {
    for (std::size_t j = 0; j < tab.m; ++j) {
      if (i == j) continue;
      const cplx num = engine_.theta(point.t[i] - point.t[j] + two_eta);
      const cplx den = engine_.theta(point.t[i] - point.t[j]);
      if (std::abs(num) < floor)
        throw PoleProximity("omega tables: theta(t_i - t_j + 2 eta) too small");
      if (std::abs(den) < floor_sep)
        throw PoleProximity("omega tables: variables collide (t_i - t_j near lattice)");
      tab.rt[i * tab.m + j] = num / den;
      if (i < j) tab.u_inv *= den / num;
    }
  }
  return tab;
}

cplx OmegaEvaluator::multi_from_tables(const Composition& comp,
                                       const OmegaPoint& point,
                                       const Tables& tab) const {
  const std::size_t m = tab.m;
  const std::size_t n = tab.n;
  if (comp.size() != static_cast<int>(n))
    throw ConfigError("omega multi: composition has " +
                      std::to_string(comp.size()) + " parts, model has " +
                      std::to_string(n) + " sites");
  if (comp.total() != static_cast<int>(m))
    throw ConfigError("omega multi: composition total " +
                      std::to_string(comp.total()) + " != number of variables " +
                      std::to_string(m));
  if (multinomial(m, comp.parts) > 1e7)
    throw CombinatorialOverflow("omega multi: assignment count exceeds 1e7");
  if (m == 0) return cplx(1.0, 0.0);

  const cplx eta = config_.eta();
  const cplx two_eta = 2.0 * eta;

  // Site factors theta(lambda_k + 2 eta m_k + t_i - z_k - a_k) / theta(t_i - z_k - a_k)
  // with lambda_k = lambda - 2 eta sum_{l<k} (Lambda_l - 2 m_l).
  std::vector<cplx> lr(n * m);
  for (std::size_t k = 0; k < n; ++k) {
    const cplx lam_k = point.lambda - two_eta * partial_weight(config_, comp, k);
    const cplx shift = lam_k + two_eta * static_cast<double>(comp.parts[k]);
    for (std::size_t i = 0; i < m; ++i) {
      lr[k * m + i] =
          engine_.theta(shift + point.t[i] - config_.z[k] - config_.a(k)) /
          tab.dlow[i * n + k];
    }
  }

  // Sum over assignments g: {1..m} -> sites with |g^{-1}(k)| = m_k,
  // enumerated as permutations of the sorted multiset of site labels.
  std::vector<std::size_t> g;
  g.reserve(m);
  for (std::size_t k = 0; k < n; ++k)
    g.insert(g.end(), static_cast<std::size_t>(comp.parts[k]), k);

  cplx sum(0.0, 0.0);
  do {
    cplx term(1.0, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < g[i]; ++k) term *= tab.rz[i * n + k];
      term *= lr[g[i] * m + i];
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        if (g[i] < g[j])
          term *= tab.rt[i * m + j];
        else if (g[j] < g[i])
          term *= tab.rt[j * m + i];
      }
    }
    sum += term;
  } while (std::next_permutation(g.begin(), g.end()));

  return tab.u_inv * sum;
}

cplx OmegaEvaluator::multi(const Composition& comp, const OmegaPoint& point) const {
  // Cheap combinatorial guards first, so oversized requests never build tables.
  if (comp.total() != static_cast<int>(point.t.size()))
    throw ConfigError("omega multi: composition total does not match point size");
  if (multinomial(point.t.size(), comp.parts) > 1e7)
    throw CombinatorialOverflow("omega multi: assignment count exceeds 1e7");
  const Tables tab = make_tables(point);
  return multi_from_tables(comp, point, tab);
}

std::vector<cplx> OmegaEvaluator::all(std::size_t m, const OmegaPoint& point) const {
  if (point.t.size() != m)
    throw ConfigError("omega all: point size does not match degree");
  const Tables tab = make_tables(point);
  const auto comps = enumerate_compositions(config_.n(), static_cast<int>(m));
  std::vector<cplx> out;
  out.reserve(comps.size());
  for (const auto& comp : comps) out.push_back(multi_from_tables(comp, point, tab));
  return out;
}

TFunc OmegaEvaluator::multi_handle(const Composition& comp, cplx lambda) const {
  return [this, comp, lambda](const std::vector<cplx>& t) {
    OmegaPoint p{t, lambda};
    return multi(comp, p);
  };
}

std::function<std::vector<cplx>(const std::vector<cplx>&)>
OmegaEvaluator::batch_handle(std::size_t m, cplx lambda) const {
  return [this, m, lambda](const std::vector<cplx>& t) {
    OmegaPoint p{t, lambda};
    return all(m, p);
  };
}

cplx OmegaEvaluator::sym_oracle(const Composition& comp, const OmegaPoint& point) const {
  const std::size_t n = static_cast<std::size_t>(config_.n());
  const std::size_t m = point.t.size();
  if (comp.size() != static_cast<int>(n) || comp.total() != static_cast<int>(m))
    throw ConfigError("sym_oracle: composition incompatible with point");
  if (m == 0) return cplx(1.0, 0.0);

  const cplx eta = config_.eta();
  const cplx two_eta = 2.0 * eta;
  const double floor = 1e-10 * engine_.scale();

  // Block boundaries: block k holds variables [start_k, start_k + m_k).
  std::vector<std::size_t> start(n + 1, 0);
  for (std::size_t k = 0; k < n; ++k)
    start[k + 1] = start[k] + static_cast<std::size_t>(comp.parts[k]);

  // Product of one-point blocks on consecutive ranges times connecting
  // theta ratios, evaluated at a permuted tuple.
  auto inner = [&](const std::vector<cplx>& t) {
    cplx value(1.0, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t mk = static_cast<std::size_t>(comp.parts[k]);
      OmegaPoint block;
      block.t.assign(t.begin() + static_cast<std::ptrdiff_t>(start[k]),
                     t.begin() + static_cast<std::ptrdiff_t>(start[k + 1]));
      block.lambda = point.lambda - two_eta * partial_weight(config_, comp, k);
      value *= one_point(mk, block, config_.z[k], config_.a(k));
      for (std::size_t j = start[k]; j < start[k + 1]; ++j) {
        for (std::size_t l = 0; l < k; ++l) {
          const cplx den = engine_.theta(t[j] - config_.z[l] - config_.a(l));
          if (std::abs(den) < floor)
            throw PoleProximity("sym_oracle: theta(t_j - z_l - a_l) too small");
          value *= engine_.theta(t[j] - config_.z[l] + config_.a(l)) / den;
        }
      }
    }
    return value;
  };

  // Twisted symmetrization through the intertwiner: Sym(f) = u^{-1} Sym0(u f).
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<cplx> ts(m);
  cplx sum(0.0, 0.0);
  do {
    for (std::size_t i = 0; i < m; ++i) ts[i] = point.t[perm[i]];
    sum += u_value(engine_, two_eta, ts, sep_guard_) * inner(ts);
  } while (std::next_permutation(perm.begin(), perm.end()));

  double norm = 1.0;
  for (int p : comp.parts) norm *= factorial(static_cast<std::size_t>(p));
  return sum / (u_factor(point.t) * norm);
}

cplx OmegaEvaluator::s_action(std::size_t j, const TFunc& f,
                              const std::vector<cplx>& t) const {
  const std::size_t m = t.size();
  if (j < 1 || j >= m)
    throw ConfigError("s_action: index j must satisfy 1 <= j <= m-1");
  const cplx two_eta = 2.0 * config_.eta();
  const cplx diff = t[j - 1] - t[j];
  const cplx den = engine_.theta(diff + two_eta);
  if (std::abs(den) < 1e-10 * engine_.scale())
    throw PoleProximity("s_action: theta(t_j - t_{j+1} + 2 eta) too small");
  std::vector<cplx> swapped = t;
  std::swap(swapped[j - 1], swapped[j]);
  return f(swapped) * engine_.theta(diff - two_eta) / den;
}

std::vector<cplx> OmegaEvaluator::sample_point(std::size_t m, Rng& rng,
                                               double margin) const {
  const cplx tau = config_.elliptic.tau;
  const cplx two_eta = 2.0 * config_.eta();
  const std::size_t n = static_cast<std::size_t>(config_.n());
  for (int attempt = 0; attempt < 2000; ++attempt) {
    std::vector<cplx> t(m);
    for (std::size_t i = 0; i < m; ++i)
      t[i] = rng.real(0.05, 0.95) + rng.real(0.05, 0.95) * tau;
    bool ok = true;
    for (std::size_t i = 0; i < m && ok; ++i) {
      for (std::size_t k = 0; k < n && ok; ++k) {
        if (engine_.lattice_distance(t[i] - config_.z[k] - config_.a(k)) < margin)
          ok = false;
      }
      for (std::size_t j = i + 1; j < m && ok; ++j) {
        const cplx d = t[i] - t[j];
        if (engine_.lattice_distance(d) < margin ||
            engine_.lattice_distance(d + two_eta) < margin ||
            engine_.lattice_distance(d - two_eta) < margin)
          ok = false;
      }
    }
    if (ok) return t;
  }
  throw ConfigError("sample_point: could not find a point clear of the pole divisor");
}

MembershipReport OmegaEvaluator::check_membership(const TFunc& f, std::size_t m,
                                                  cplx lambda,
                                                  std::size_t samples,
                                                  std::uint64_t seed) const {
  MembershipReport report;
  if (m == 0) return report;
  Rng rng(seed);
  const cplx tau = config_.elliptic.tau;
  const cplx eta = config_.eta();
  const cplx tau_free_factor =
      std::exp(-kTwoPi * kI * (lambda + 2.0 * eta * static_cast<double>(m)));

  for (std::size_t s = 0; s < samples; ++s) {
    const std::vector<cplx> t = sample_point(m, rng);
    const cplx base = f(t);
    const cplx u_base = u_factor(t);
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<cplx> shifted = t;

      shifted[j] = t[j] + 1.0;
      report.period_dev = std::max(report.period_dev, rel_dev(f(shifted), base));

      shifted[j] = t[j] + tau;
      const cplx fshift = f(shifted);
      const cplx factor = std::exp(
          -kTwoPi * kI *
          (lambda + 4.0 * eta * static_cast<double>(j + 1) - 2.0 * eta));
      report.tau_multiplier_dev =
          std::max(report.tau_multiplier_dev, rel_dev(fshift, factor * base));

      const cplx g_shift = u_factor(shifted) * fshift;
      report.sym_multiplier_dev = std::max(
          report.sym_multiplier_dev,
          rel_dev(g_shift, tau_free_factor * u_base * base));
    }
  }
  return report;
}

LFunc phi_combine(const OmegaEvaluator& ev, const LFunc& f, std::size_t m1,
                  std::vector<cplx> z1, std::vector<cplx> a1, const LFunc& g) {
  const ThetaEngine engine = ev.engine();
  const cplx eta = ev.config().eta();
  const cplx two_eta = 2.0 * eta;
  cplx nu = -two_eta * static_cast<double>(m1);
  for (const cplx& a : a1) nu += a;

  return [engine, two_eta, nu, m1, z1 = std::move(z1), a1 = std::move(a1), f,
          g](const std::vector<cplx>& t, cplx lambda) -> cplx {
    const std::size_t m = t.size();
    if (m1 > m) throw ConfigError("phi_combine: first block larger than tuple");
    const std::size_t m2 = m - m1;
    const double floor = 1e-10 * engine.scale();

    auto inner = [&](const std::vector<cplx>& ts) {
      std::vector<cplx> t_first(ts.begin(), ts.begin() + static_cast<std::ptrdiff_t>(m1));
      std::vector<cplx> t_second(ts.begin() + static_cast<std::ptrdiff_t>(m1), ts.end());
      cplx value = f(t_first, lambda) * g(t_second, lambda - 2.0 * nu);
      for (std::size_t j = m1; j < m; ++j) {
        for (std::size_t l = 0; l < z1.size(); ++l) {
          const cplx den = engine.theta(ts[j] - z1[l] - a1[l]);
          if (std::abs(den) < floor)
            throw PoleProximity("phi_combine: theta(t_j - z_l - a_l) too small");
          value *= engine.theta(ts[j] - z1[l] + a1[l]) / den;
        }
      }
      return value;
    };

    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<cplx> ts(m);
    cplx sum(0.0, 0.0);
    do {
      for (std::size_t i = 0; i < m; ++i) ts[i] = t[perm[i]];
      sum += u_value(engine, two_eta, ts, 1e-8) * inner(ts);
    } while (std::next_permutation(perm.begin(), perm.end()));

    return sum / (u_value(engine, two_eta, t, 1e-8) * factorial(m1) * factorial(m2));
  };
}

}  // namespace ellipq
