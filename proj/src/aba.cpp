#include "ellipq/aba.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <utility>
#include <vector>

#include "ellipq/elliptic.hpp"
#include "ellipq/errors.hpp"
#include "ellipq/omega.hpp"
#include "ellipq/rmatrix.hpp"
#include "ellipq/util.hpp"

namespace ellipq {

namespace {

int find_label(const std::vector<Composition>& basis, const Composition& want) {
  for (std::size_t i = 0; i < basis.size(); ++i) {
    if (basis[i] == want) return static_cast<int>(i);
  }
  return -1;
}

// Matrix of one two-factor block R_{1,Lambda}(zdiff, lambda - 2 eta sum_{s in
// shift_slots} h^{(s)}) acting on the auxiliary slot `aux_slot` (weight 1) and
// the slot `site_slot`, with every other slot a spectator.  The dynamical
// argument is resolved per column from the column's composition label; output
// labels absent from the capped basis are projected away (valid because the
// deleted labels span an invariant subspace for integer weights).
Eigen::MatrixXcd pair_factor(const EllipticParams& par,
                             const std::vector<cplx>& weights,
                             const std::vector<Composition>& basis, int aux_slot,
                             int site_slot, const std::vector<int>& shift_slots,
                             cplx zdiff, cplx lambda) {
  const cplx two_eta = 2.0 * par.eta;
  const int dim = static_cast<int>(basis.size());
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
  for (int c = 0; c < dim; ++c) {
    const Composition& in = basis[static_cast<std::size_t>(c)];
    const int aux_in = in[aux_slot];
    const int k = in[site_slot];
    cplx lam = lambda;
    for (int s : shift_slots) {
      lam -= two_eta * (weights[static_cast<std::size_t>(s)] - 2.0 * in[s]);
    }
    const EvaluationEntries e =
        r_one_lambda(par, weights[static_cast<std::size_t>(site_slot)], zdiff, lam, k);
    auto place = [&](int aux_out, int site_out, cplx value) {
      if (site_out < 0) return;
      Composition lab = in;
      lab.parts[static_cast<std::size_t>(aux_slot)] = aux_out;
      lab.parts[static_cast<std::size_t>(site_slot)] = site_out;
      const int r = find_label(basis, lab);
      if (r >= 0) out(r, c) += value;
    };
    if (aux_in == 0) {
      place(0, k, e.stay0);
      place(1, k - 1, e.lower);
    } else if (aux_in == 1) {
      place(0, k + 1, e.raise);
      place(1, k, e.stay1);
    } else {
      throw ConfigError("auxiliary label exceeds the two-dimensional factor");
    }
  }
  return out;
}

std::vector<std::optional<int>> site_truncation(const ModelConfig& config) {
  if (!config.truncation.empty()) return config.truncation;
  return std::vector<std::optional<int>>(static_cast<std::size_t>(config.n()),
                                         std::nullopt);
}

}  // namespace

LOperator build_L(const ModelConfig& config) {
  config.validate();
  LOperator op;
  op.config = config;
  op.ext_weights.reserve(static_cast<std::size_t>(config.n()) + 1);
  op.ext_weights.push_back(cplx{1.0, 0.0});
  op.ext_weights.insert(op.ext_weights.end(), config.Lambda.begin(),
                        config.Lambda.end());
  op.ext_caps.reserve(static_cast<std::size_t>(config.n()) + 1);
  op.ext_caps.push_back(1);
  const std::vector<int> site_caps = config.caps_or_unbounded();
  op.ext_caps.insert(op.ext_caps.end(), site_caps.begin(), site_caps.end());
  return op;
}

std::vector<Composition> l_sector(const LOperator& op, int drop) {
  if (drop < 0) return {};
  return enumerate_compositions(op.config.n() + 1, drop, &op.ext_caps);
}

Eigen::MatrixXcd l_matrix(const LOperator& op, cplx z, cplx lambda, int drop) {
  const std::vector<Composition> basis = l_sector(op, drop);
  const int dim = static_cast<int>(basis.size());
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(dim, dim);
  const int n = op.config.n();
  for (int k = n; k >= 1; --k) {
    std::vector<int> shifts;
    for (int l = 1; l < k; ++l) shifts.push_back(l);
    M = M * pair_factor(op.config.elliptic, op.ext_weights, basis, 0, k, shifts,
                        z - op.config.z[static_cast<std::size_t>(k - 1)], lambda);
  }
  return M;
}

Eigen::MatrixXcd l_block(const LOperator& op, char which, cplx z, cplx lambda,
                         int v_drop_in) {
  int aux_in = 0;
  int aux_out = 0;
  switch (which) {
    case 'a': aux_out = 0; aux_in = 0; break;
    case 'b': aux_out = 0; aux_in = 1; break;
    case 'c': aux_out = 1; aux_in = 0; break;
    case 'd': aux_out = 1; aux_in = 1; break;
    default:
      throw ConfigError("operator block label must be one of a, b, c, d");
  }
  if (v_drop_in < 0) throw ConfigError("weight drop must be nonnegative");
  const int total = v_drop_in + aux_in;
  const std::vector<Composition> basis = l_sector(op, total);
  const Eigen::MatrixXcd full = l_matrix(op, z, lambda, total);
  std::vector<int> rows;
  std::vector<int> cols;
  for (std::size_t i = 0; i < basis.size(); ++i) {
    if (basis[i][0] == aux_out) rows.push_back(static_cast<int>(i));
    if (basis[i][0] == aux_in) cols.push_back(static_cast<int>(i));
  }
  Eigen::MatrixXcd block(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      block(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          full(rows[r], cols[c]);
    }
  }
  return block;
}

double l_defining_residual(const LOperator& op, cplx z, cplx lambda, int drop,
                           int t_samples, std::uint64_t seed) {
  const ModelConfig& cfg = op.config;
  const std::vector<std::optional<int>> site_tr = site_truncation(cfg);

  ModelConfig first = cfg;
  first.Lambda = op.ext_weights;
  first.z.assign(1, z);
  first.z.insert(first.z.end(), cfg.z.begin(), cfg.z.end());
  first.m = drop;
  first.truncation.assign(1, std::optional<int>(1));
  first.truncation.insert(first.truncation.end(), site_tr.begin(), site_tr.end());
  first.validate();

  ModelConfig last = cfg;
  last.Lambda = cfg.Lambda;
  last.Lambda.push_back(cplx{1.0, 0.0});
  last.z = cfg.z;
  last.z.push_back(z);
  last.m = drop;
  last.truncation = site_tr;
  last.truncation.push_back(std::optional<int>(1));
  last.validate();

  const OmegaEvaluator ev_first(first);
  const OmegaEvaluator ev_last(last);
  const std::vector<Composition> basis = l_sector(op, drop);
  const int dim = static_cast<int>(basis.size());
  const Eigen::MatrixXcd Lmat = l_matrix(op, z, lambda, drop);

  Rng rng(seed);
  double worst = 0.0;
  for (int s = 0; s < t_samples; ++s) {
    const std::vector<cplx> t = ev_first.sample_point(static_cast<std::size_t>(drop), rng);
    const OmegaPoint point{t, lambda};
    Eigen::VectorXcd omg(dim);
    for (int y = 0; y < dim; ++y) {
      omg(y) = ev_first.multi(basis[static_cast<std::size_t>(y)], point);
    }
    const Eigen::VectorXcd lhs = Lmat * omg;
    Eigen::VectorXcd rhs(dim);
    for (int x = 0; x < dim; ++x) {
      const Composition& lab = basis[static_cast<std::size_t>(x)];
      std::vector<int> rot(lab.parts.begin() + 1, lab.parts.end());
      rot.push_back(lab.parts.front());
      rhs(x) = ev_last.multi(Composition(rot), point);
    }
    const double scale = std::max(rhs.cwiseAbs().maxCoeff(), 1e-300);
    worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff() / scale);
  }
  return worst;
}

double rll_residual(const LOperator& op, cplx z, cplx w, cplx lambda, int drop) {
  const ModelConfig& cfg = op.config;
  const int n = cfg.n();
  std::vector<cplx> weights;
  weights.reserve(static_cast<std::size_t>(n) + 2);
  weights.push_back(cplx{1.0, 0.0});
  weights.push_back(cplx{1.0, 0.0});
  weights.insert(weights.end(), cfg.Lambda.begin(), cfg.Lambda.end());
  std::vector<int> caps;
  caps.reserve(static_cast<std::size_t>(n) + 2);
  caps.push_back(1);
  caps.push_back(1);
  const std::vector<int> site_caps = cfg.caps_or_unbounded();
  caps.insert(caps.end(), site_caps.begin(), site_caps.end());
  const std::vector<Composition> basis = enumerate_compositions(n + 2, drop, &caps);
  const int dim = static_cast<int>(basis.size());
  const EllipticParams& par = cfg.elliptic;

  // Ordered product of the site factors for the auxiliary slot `aux_slot` at
  // spectral point z0, dynamical argument additionally shifted by the weights
  // of the slots in `extra` (site k occupies flattened slot k + 1).
  auto chain = [&](int aux_slot, cplx z0, const std::vector<int>& extra) {
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(dim, dim);
    for (int k = n; k >= 1; --k) {
      std::vector<int> shifts = extra;
      for (int l = 2; l <= k; ++l) shifts.push_back(l);
      M = M * pair_factor(par, weights, basis, aux_slot, k + 1, shifts,
                          z0 - cfg.z[static_cast<std::size_t>(k - 1)], lambda);
    }
    return M;
  };

  std::vector<int> all_sites;
  for (int l = 2; l <= n + 1; ++l) all_sites.push_back(l);
  const Eigen::MatrixXcd lhs =
      pair_factor(par, weights, basis, 0, 1, all_sites, z - w, lambda) *
      chain(0, z, {}) * chain(1, w, {0});
  const Eigen::MatrixXcd rhs =
      chain(1, w, {}) * chain(0, z, {1}) *
      pair_factor(par, weights, basis, 0, 1, {}, z - w, lambda);
  const double scale =
      std::max({lhs.cwiseAbs().maxCoeff(), rhs.cwiseAbs().maxCoeff(), 1e-300});
  return (lhs - rhs).cwiseAbs().maxCoeff() / scale;
}

ShiftOperator transfer_from_L(const LOperator& op, cplx w) {
  if (!op.config.zero_weight_consistent()) {
    throw ConfigError("transfer matrix needs sum Lambda = 2 m");
  }
  const std::vector<Composition> basis = zero_weight_basis(op.config);
  ShiftOperator T;
  T.codomain = basis;
  T.domain = basis;
  T.two_eta = 2.0 * op.config.eta();
  const int m = op.config.m;
  T.terms[1] = [op, w, m](cplx lambda) -> Eigen::MatrixXcd {
    return l_block(op, 'a', w, lambda, m);
  };
  T.terms[-1] = [op, w, m](cplx lambda) -> Eigen::MatrixXcd {
    return l_block(op, 'd', w, lambda, m);
  };
  return T;
}

std::vector<cplx> to_aba_roots(const ModelConfig& config, const std::vector<cplx>& t) {
  std::vector<cplx> out = t;
  for (cplx& x : out) x += config.eta();
  return out;
}

std::vector<cplx> from_aba_roots(const ModelConfig& config, const std::vector<cplx>& t) {
  std::vector<cplx> out = t;
  for (cplx& x : out) x -= config.eta();
  return out;
}

double aba_bethe_residual(const ModelConfig& config, const std::vector<cplx>& t_aba,
                          cplx c) {
  config.validate();
  if (static_cast<int>(t_aba.size()) != config.m) {
    throw ConfigError("root count must equal the configured drop");
  }
  const int m = config.m;
  if (m == 0) return 0.0;
  const ThetaEngine engine(config.elliptic);
  const cplx eta = config.eta();
  const cplx two_eta = 2.0 * eta;
  const cplx damp = std::exp(-4.0 * eta * c);
  double worst = 0.0;
  for (int i = 0; i < m; ++i) {
    cplx prod{1.0, 0.0};
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      prod *= engine.theta(t_aba[static_cast<std::size_t>(j)] -
                           t_aba[static_cast<std::size_t>(i)] - two_eta) /
              engine.theta(t_aba[static_cast<std::size_t>(j)] -
                           t_aba[static_cast<std::size_t>(i)] + two_eta);
    }
    for (int k = 0; k < config.n(); ++k) {
      const cplx base = t_aba[static_cast<std::size_t>(i)] -
                        config.z[static_cast<std::size_t>(k)];
      const cplx Lk = config.Lambda[static_cast<std::size_t>(k)];
      prod *= engine.theta(base - (1.0 + Lk) * eta) /
              engine.theta(base - (1.0 - Lk) * eta);
    }
    worst = std::max(worst, std::abs(prod * damp - 1.0));
  }
  return worst;
}

cplx aba_eigenvalue(const ModelConfig& config, const std::vector<cplx>& t_aba,
                    cplx c, cplx w) {
  config.validate();
  if (static_cast<int>(t_aba.size()) != config.m) {
    throw ConfigError("root count must equal the configured drop");
  }
  const ThetaEngine engine(config.elliptic);
  const cplx eta = config.eta();
  const cplx two_eta = 2.0 * eta;
  cplx down{1.0, 0.0};
  cplx up{1.0, 0.0};
  for (const cplx& tj : t_aba) {
    const cplx den = engine.theta(tj - w);
    down *= engine.theta(tj - w - two_eta) / den;
    up *= engine.theta(tj - w + two_eta) / den;
  }
  cplx sites{1.0, 0.0};
  for (int k = 0; k < config.n(); ++k) {
    const cplx base = w - config.z[static_cast<std::size_t>(k)];
    const cplx Lk = config.Lambda[static_cast<std::size_t>(k)];
    sites *= engine.theta(base - (1.0 - Lk) * eta) /
             engine.theta(base - (1.0 + Lk) * eta);
  }
  return std::exp(-two_eta * c) * down + std::exp(two_eta * c) * up * sites;
}

Eigen::VectorXcd b_product_state(const ModelConfig& config,
                                 const std::vector<cplx>& t, cplx c, cplx lambda) {
  config.validate();
  const int m = config.m;
  if (static_cast<int>(t.size()) != m) {
    throw ConfigError("root count must equal the configured drop");
  }
  const ThetaEngine engine(config.elliptic);
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      if (engine.lattice_distance(t[static_cast<std::size_t>(i)] -
                                  t[static_cast<std::size_t>(j)]) < 1e-8) {
        throw SingularConfiguration(
            "coinciding roots make the chain state degenerate");
      }
    }
  }
  const cplx eta = config.eta();
  const cplx two_eta = 2.0 * eta;
  cplx head = std::exp(c * (lambda + two_eta * static_cast<double>(m)));
  for (int i = 0; i < m; ++i) {
    head *= engine.theta(lambda + two_eta * static_cast<double>(i)) /
            engine.theta(two_eta);
  }
  const LOperator op = build_L(config);
  Eigen::VectorXcd state(1);
  state(0) = head;
  for (int k = m; k >= 1; --k) {
    const cplx spectral = t[static_cast<std::size_t>(k - 1)] + eta;
    const cplx arg = lambda + two_eta * static_cast<double>(k - 1);
    state = (l_block(op, 'b', spectral, arg, m - k) * state).eval();
  }
  return state;
}

AbaVerifyReport aba_transfer_verify(const ModelConfig& config,
                                    const std::vector<cplx>& t_aba, cplx c,
                                    int w_samples, int lambda_samples,
                                    std::uint64_t seed) {
  config.validate();
  if (static_cast<int>(t_aba.size()) != config.m) {
    throw ConfigError("root count must equal the configured drop");
  }
  if (!config.zero_weight_consistent()) {
    throw ConfigError("transfer verification needs sum Lambda = 2 m");
  }
  AbaVerifyReport report;
  report.bae_residual = aba_bethe_residual(config, t_aba, c);

  const ThetaEngine engine(config.elliptic);
  const double scale = engine.scale();
  const cplx eta = config.eta();
  const int m = config.m;
  Rng rng(seed);

  auto draw_lambda = [&]() -> cplx {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const cplx l = rng.box(-0.45, 0.45, 0.05, 0.4);
      bool ok = true;
      for (int k = -(2 * m + 2); k <= 2 * m + 2 && ok; ++k) {
        if (std::abs(engine.theta(l + 2.0 * eta * static_cast<double>(k))) <=
            1e-6 * scale) {
          ok = false;
        }
      }
      if (ok) return l;
    }
    throw ContourError("no dynamical sample clear of the theta zeros");
  };
  auto draw_w = [&]() -> cplx {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const cplx w = rng.box(-0.45, 0.45, -0.35, 0.35);
      bool ok = true;
      for (const cplx& tj : t_aba) {
        if (std::abs(engine.theta(tj - w)) <= 1e-6 * scale) ok = false;
      }
      for (int k = 0; k < config.n() && ok; ++k) {
        const cplx base = w - config.z[static_cast<std::size_t>(k)];
        const cplx Lk = config.Lambda[static_cast<std::size_t>(k)];
        if (std::abs(engine.theta(base - (1.0 + Lk) * eta)) <= 1e-6 * scale ||
            std::abs(engine.theta(base - (1.0 - Lk) * eta)) <= 1e-6 * scale) {
          ok = false;
        }
      }
      if (ok) return w;
    }
    throw ContourError("no spectral sample clear of the theta zeros");
  };

  std::vector<cplx> lams;
  for (int i = 0; i < lambda_samples; ++i) lams.push_back(draw_lambda());
  std::vector<cplx> ws;
  for (int i = 0; i < w_samples; ++i) ws.push_back(draw_w());

  const std::vector<cplx> t_nat = from_aba_roots(config, t_aba);
  const VectorFunc psi = [config, t_nat, c](cplx l) -> Eigen::VectorXcd {
    return b_product_state(config, t_nat, c, l);
  };

  const cplx mult = (m % 2 != 0 ? -1.0 : 1.0) * std::exp(c);
  for (const cplx& l : lams) {
    const Eigen::VectorXcd shifted = psi(l + 1.0);
    const Eigen::VectorXcd ref = mult * psi(l);
    report.multiplier_residual =
        std::max(report.multiplier_residual,
                 (shifted - ref).cwiseAbs().maxCoeff() /
                     std::max(ref.cwiseAbs().maxCoeff(), 1e-300));
  }

  const LOperator op = build_L(config);
  for (const cplx& w : ws) {
    const ShiftOperator T = transfer_from_L(op, w);
    const cplx value = aba_eigenvalue(config, t_aba, c, w);
    for (const cplx& l : lams) {
      const Eigen::VectorXcd lhs = apply_op(T, psi, l);
      const Eigen::VectorXcd rhs = value * psi(l);
      report.transfer_residual =
          std::max(report.transfer_residual,
                   (lhs - rhs).cwiseAbs().maxCoeff() /
                       std::max(rhs.cwiseAbs().maxCoeff(), 1e-300));
    }
  }
  return report;
}

}  // namespace ellipq
