#include "ellipq/bethe.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <sstream>
#include <utility>

#include "ellipq/elliptic.hpp"
#include "ellipq/errors.hpp"
#include "ellipq/omega.hpp"
#include "ellipq/util.hpp"

namespace ellipq {

namespace {

// Left-hand side of root equation j in product form (the right-hand side is
// e^{-4 eta c}).
cplx equation_product(const ThetaEngine& engine, const ModelConfig& config,
                      const std::vector<cplx>& t, std::size_t j) {
  const cplx two_eta = 2.0 * config.eta();
  cplx prod(1.0, 0.0);
  for (int l = 0; l < config.n(); ++l) {
    const cplx base = t[j] - config.z[static_cast<std::size_t>(l)];
    prod *= engine.theta(base + config.a(l)) / engine.theta(base - config.a(l));
  }
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (k == j) continue;
    prod *= engine.theta(t[j] - t[k] - two_eta) /
            engine.theta(t[j] - t[k] + two_eta);
  }
  return prod;
}

// Logarithmic residual G_j = log LHS_j + 4 eta c, re-rounded onto the branch
// nearest to zero.  Returns false when a theta factor vanishes (the log is
// not finite there).
bool log_residual(const ThetaEngine& engine, const ModelConfig& config, cplx c,
                  const std::vector<cplx>& t, Eigen::VectorXcd& g) {
  const cplx two_eta = 2.0 * config.eta();
  const cplx offset = 4.0 * config.eta() * c;
  const auto m = t.size();
  g.resize(static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    cplx acc = offset;
    for (int l = 0; l < config.n(); ++l) {
      const cplx base = t[j] - config.z[static_cast<std::size_t>(l)];
      acc += std::log(engine.theta(base + config.a(l))) -
             std::log(engine.theta(base - config.a(l)));
    }
    for (std::size_t k = 0; k < m; ++k) {
      if (k == j) continue;
      acc += std::log(engine.theta(t[j] - t[k] - two_eta)) -
             std::log(engine.theta(t[j] - t[k] + two_eta));
    }
    acc -= cplx(0.0, kTwoPi) * std::round(acc.imag() / kTwoPi);
    if (!std::isfinite(acc.real()) || !std::isfinite(acc.imag())) return false;
    g(static_cast<Eigen::Index>(j)) = acc;
  }
  return true;
}

// d/dx log theta(x).
cplx theta_log_deriv(const ThetaEngine& engine, cplx x) {
  return engine.theta_deriv(x) / engine.theta(x);
}

Eigen::MatrixXcd log_jacobian(const ThetaEngine& engine,
                              const ModelConfig& config,
                              const std::vector<cplx>& t) {
  const cplx two_eta = 2.0 * config.eta();
  const auto m = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXcd jac = Eigen::MatrixXcd::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const cplx tj = t[static_cast<std::size_t>(j)];
    cplx diag(0.0, 0.0);
    for (int l = 0; l < config.n(); ++l) {
      const cplx base = tj - config.z[static_cast<std::size_t>(l)];
      diag += theta_log_deriv(engine, base + config.a(l)) -
              theta_log_deriv(engine, base - config.a(l));
    }
    for (Eigen::Index k = 0; k < m; ++k) {
      if (k == j) continue;
      const cplx d = tj - t[static_cast<std::size_t>(k)];
      const cplx low = theta_log_deriv(engine, d - two_eta);
      const cplx high = theta_log_deriv(engine, d + two_eta);
      diag += low - high;
      jac(j, k) = high - low;
    }
    jac(j, j) = diag;
  }
  return jac;
}

void require_root_count(const ModelConfig& config, std::size_t count,
                        const char* what) {
  if (count != static_cast<std::size_t>(config.m))
    throw ConfigError(std::string(what) + ": got " + std::to_string(count) +
                      " roots, the model has m = " + std::to_string(config.m));
}

// Reduces x modulo the integer direction only: x - round(alpha) where
// x = alpha + beta tau.  Translating a root by 1 gives the same solution,
// while translating by tau changes the equations, so only the integer
// direction is quotiented in the stored representative.
cplx reduce_mod_one(cplx x, cplx tau) {
  const double beta = x.imag() / tau.imag();
  const double alpha = x.real() - beta * tau.real();
  return x - std::round(alpha);
}

std::vector<cplx> canonical_roots(const std::vector<cplx>& t, cplx tau) {
  std::vector<cplx> out(t.size());
  std::transform(t.begin(), t.end(), out.begin(),
                 [tau](cplx x) { return reduce_mod_one(x, tau); });
  std::sort(out.begin(), out.end(), [](cplx a, cplx b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return out;
}

bool same_solution(const ThetaEngine& engine, const std::vector<cplx>& a,
                   const std::vector<cplx>& b, double tol) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (engine.lattice_distance(a[i] - b[i]) > tol) return false;
  return true;
}

}  // namespace

double bethe_residual(const ModelConfig& config, const std::vector<cplx>& t,
                      cplx c) {
  require_root_count(config, t.size(), "bethe_residual");
  const ThetaEngine engine(config.elliptic);
  const cplx rhs_inv = std::exp(4.0 * config.eta() * c);
  double worst = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j)
    worst = std::max(worst,
                     std::abs(equation_product(engine, config, t, j) * rhs_inv -
                              1.0));
  return worst;
}

std::vector<cplx> bethe_eigenvalues(const ModelConfig& config,
                                    const std::vector<cplx>& t, cplx c) {
  require_root_count(config, t.size(), "bethe_eigenvalues");
  const ThetaEngine engine(config.elliptic);
  std::vector<cplx> eps(static_cast<std::size_t>(config.n()));
  for (int j = 0; j < config.n(); ++j) {
    cplx value = std::exp(-2.0 * c * config.a(j));
    for (const cplx& tk : t) {
      const cplx base = tk - config.z[static_cast<std::size_t>(j)];
      value *= engine.theta(base - config.a(j)) /
               engine.theta(base + config.a(j));
    }
    eps[static_cast<std::size_t>(j)] = value;
  }
  return eps;
}

BetheSolution make_solution(const ModelConfig& config, std::vector<cplx> t,
                            cplx c) {
  require_root_count(config, t.size(), "make_solution");
  BetheSolution sol;
  sol.residual = bethe_residual(config, t, c);
  sol.eps = bethe_eigenvalues(config, t, c);
  sol.t = std::move(t);
  sol.c = c;
  sol.multiplier = (config.m % 2 != 0 ? -1.0 : 1.0) * std::exp(c);
  return sol;
}

std::vector<cplx> bethe_newton(const ModelConfig& config, cplx c,
                               std::vector<cplx> start,
                               const NewtonOptions& opt) {
  config.validate();
  require_root_count(config, start.size(), "bethe_newton");
  if (config.m == 0) return start;
  const ThetaEngine engine(config.elliptic);

  Eigen::VectorXcd g;
  if (!log_residual(engine, config, c, start, g))
    throw ConvergenceFailure("bethe_newton: start point sits on a pole of the equations");

  std::vector<cplx> t = std::move(start);
  bool converged = g.norm() < opt.tolerance;
  for (int iter = 0; iter < opt.max_iterations && !converged; ++iter) {
    const Eigen::MatrixXcd jac = log_jacobian(engine, config, t);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(
        jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) < opt.singular_floor * sv(0))
      throw JacobianSingular("bethe_newton: Jacobian of the log form is singular");
    const Eigen::VectorXcd step = svd.solve(-g);

    // Damped line search with a weak decrease requirement; candidate points
    // where a factor hits a pole (non-finite log) are rejected.
    const double gn = g.norm();
    bool accepted = false;
    for (double s = 1.0; s >= 1.0 / 128.0; s *= 0.5) {
      std::vector<cplx> trial = t;
      for (std::size_t i = 0; i < trial.size(); ++i)
        trial[i] += s * step(static_cast<Eigen::Index>(i));
      Eigen::VectorXcd gt;
      if (!log_residual(engine, config, c, trial, gt)) continue;
      if (gt.norm() <= gn * (1.0 - 1e-4 * s)) {
        t = std::move(trial);
        g = std::move(gt);
        accepted = true;
        break;
      }
    }
    // The iteration is deterministic, so a failed line search would only
    // repeat itself; near a root this means the floating-point floor of the
    // log form is reached and the product-form gate below decides.
    if (!accepted) break;
    converged = g.norm() < opt.tolerance;
  }
  if (bethe_residual(config, t, c) >= opt.accept)
    throw ConvergenceFailure(
        converged ? "bethe_newton: converged point fails the product-form residual bound"
                  : "bethe_newton: no convergence within the iteration budget");
  return t;
}

std::vector<BetheSolution> bethe_solve(const ModelConfig& config, cplx c,
                                       const std::vector<std::vector<cplx>>& starts,
                                       const NewtonOptions& opt) {
  config.validate();
  if (!config.zero_weight_consistent())
    throw ConfigError("bethe_solve: the weights must satisfy sum Lambda = 2 m");
  const ThetaEngine engine(config.elliptic);

  std::vector<std::optional<std::vector<cplx>>> raw(starts.size());
  parallel_for(starts.size(), [&](std::size_t i) {
    try {
      raw[i] = bethe_newton(config, c, starts[i], opt);
    } catch (const ConvergenceFailure&) {
    } catch (const JacobianSingular&) {
    }
  });

  std::vector<BetheSolution> out;
  for (const auto& candidate : raw) {
    if (!candidate) continue;
    const std::vector<cplx>& roots = *candidate;

    // Coinciding roots (modulo the lattice) sit on the diagonal where the
    // eigenfunction prefactor vanishes; they are discarded, not reported.
    bool diagonal = false;
    for (std::size_t i = 0; i < roots.size() && !diagonal; ++i)
      for (std::size_t j = i + 1; j < roots.size() && !diagonal; ++j)
        if (engine.lattice_distance(roots[i] - roots[j]) < opt.dedup_distance)
          diagonal = true;
    if (diagonal) continue;

    std::vector<cplx> canonical = canonical_roots(roots, config.elliptic.tau);
    if (bethe_residual(config, canonical, c) >= opt.accept) continue;

    bool duplicate = false;
    for (const BetheSolution& known : out)
      if (same_solution(engine, known.t, canonical, opt.dedup_distance)) {
        duplicate = true;
        break;
      }
    if (duplicate) continue;

    out.push_back(make_solution(config, std::move(canonical), c));
  }
  return out;
}

Eigen::VectorXcd bethe_psi(const ModelConfig& config, const BetheSolution& sol,
                           cplx lambda) {
  require_root_count(config, sol.t.size(), "bethe_psi");
  const OmegaEvaluator evaluator(config);
  const std::vector<Composition> basis = zero_weight_basis(config);
  const OmegaPoint point{sol.t, lambda};
  const cplx head = std::exp(sol.c * lambda);
  Eigen::VectorXcd out(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t r = 0; r < basis.size(); ++r)
    out(static_cast<Eigen::Index>(r)) = head * evaluator.multi(basis[r], point);
  return out;
}

BetheVerifyReport bethe_verify(RBlockCache& cache, const ModelConfig& config,
                               const BetheSolution& sol, int lambda_samples,
                               std::uint64_t seed) {
  config.validate();
  if (!config.zero_weight_consistent())
    throw ConfigError("bethe_verify: the weights must satisfy sum Lambda = 2 m");
  require_root_count(config, sol.t.size(), "bethe_verify");
  const int n = config.n();
  if (static_cast<int>(sol.eps.size()) != n)
    throw ConfigError("bethe_verify: solution carries " +
                      std::to_string(sol.eps.size()) + " eigenvalues for " +
                      std::to_string(n) + " factors");
  if (lambda_samples < 1)
    throw ConfigError("bethe_verify: need at least one lambda sample");

  const ThetaEngine engine(config.elliptic);
  const cplx two_eta = 2.0 * config.eta();
  Rng rng(seed);

  // Generic lambda samples, kept away from the shifted theta zeros that the
  // operator coefficients and omega denominators can hit.
  const auto draw_lambda = [&]() {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const cplx lambda = rng.box(-0.45, 0.45, 0.05, 0.4);
      bool good = true;
      for (int k = -(config.m + 2); k <= config.m + 2 && good; ++k)
        if (std::abs(engine.theta(lambda + two_eta * static_cast<double>(k))) <
            1e-6 * engine.scale())
          good = false;
      if (good) return lambda;
    }
    throw ContourError("bethe_verify: no generic lambda sample found");
  };
  std::vector<cplx> lambdas(static_cast<std::size_t>(lambda_samples));
  for (auto& lambda : lambdas) lambda = draw_lambda();

  const VectorFunc psi = [&config, &sol](cplx lambda) -> Eigen::VectorXcd {
    return bethe_psi(config, sol, lambda);
  };

  BetheVerifyReport report;
  report.eigen_residual.assign(static_cast<std::size_t>(n), 0.0);
  for (int j = 1; j <= n; ++j) {
    const ShiftOperator hj = build_H(cache, config, j);
    double worst = 0.0;
    for (const cplx& lambda : lambdas) {
      const Eigen::VectorXcd value = psi(lambda);
      const Eigen::VectorXcd applied = apply_op(hj, psi, lambda);
      const double denom = value.lpNorm<Eigen::Infinity>();
      worst = std::max(
          worst, (applied - sol.eps[static_cast<std::size_t>(j - 1)] * value)
                         .lpNorm<Eigen::Infinity>() /
                     denom);
    }
    report.eigen_residual[static_cast<std::size_t>(j - 1)] = worst;
  }

  for (const cplx& lambda : lambdas) {
    const Eigen::VectorXcd value = psi(lambda);
    const Eigen::VectorXcd shifted = psi(lambda + 1.0);
    report.multiplier_residual = std::max(
        report.multiplier_residual,
        (shifted - sol.multiplier * value).lpNorm<Eigen::Infinity>() /
            value.lpNorm<Eigen::Infinity>());
  }

  // Graded dual-pairing identity: pair psi against u (x) v where u spans the
  // weight-mu slice of the first dual factor (one basis label, first part
  // = mp) and v is a random functional on the remaining factors.  The first
  // operator without its weight shift, transposed, moves across the pairing.
  if (n >= 2) {
    const OmegaEvaluator evaluator(config);
    const std::vector<Composition> basis = zero_weight_basis(config);
    const ShiftOperator h1_right = tilde_h1(cache, config);
    const cplx c = sol.c;
    double worst = 0.0;
    for (int mp = 0; mp <= config.m; ++mp) {
      std::vector<std::size_t> slice;
      for (std::size_t r = 0; r < basis.size(); ++r)
        if (basis[r][0] == mp) slice.push_back(r);
      if (slice.empty()) continue;
      const cplx mu = config.Lambda[0] - 2.0 * static_cast<double>(mp);
      for (int draw = 0; draw < 2; ++draw) {
        Eigen::VectorXcd w =
            Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis.size()));
        for (std::size_t r : slice)
          w(static_cast<Eigen::Index>(r)) = rng.generic(1.0);
        for (int sample = 0; sample < 2; ++sample) {
          const cplx lambda = lambdas[static_cast<std::size_t>(sample) %
                                      lambdas.size()];
          const cplx shifted = lambda - two_eta * mu;
          const Eigen::MatrixXcd mat = h1_right.term(0, shifted);
          const Eigen::VectorXcd moved = mat.transpose() * w;
          cplx lhs(0.0, 0.0);
          cplx rhs(0.0, 0.0);
          for (std::size_t r = 0; r < basis.size(); ++r) {
            const Eigen::Index ri = static_cast<Eigen::Index>(r);
            if (moved(ri) != cplx(0.0, 0.0))
              lhs += moved(ri) *
                     evaluator.multi(basis[r], OmegaPoint{sol.t, shifted});
            if (w(ri) != cplx(0.0, 0.0))
              rhs += w(ri) * evaluator.multi(basis[r], OmegaPoint{sol.t, lambda});
          }
          rhs *= std::exp(two_eta * c * mu) * sol.eps[0];
          worst = std::max(worst, rel_dev(lhs, rhs));
        }
      }
    }
    report.e09_residual = worst;
  }
  return report;
}

CompletenessReport completeness_det(const CompletenessTask& task,
                                    const ModelConfig& config) {
  config.validate();
  if (!config.zero_weight_consistent())
    throw ConfigError("completeness_det: the weights must satisfy sum Lambda = 2 m");
  if (task.N % 2 == 0 || task.N <= 0)
    throw ConfigError("completeness_det: N must be a positive odd integer");
  if (task.N <= config.m)
    throw ConfigError("completeness_det: N must exceed the number of roots m");
  if (std::abs(2.0 * config.eta() - 1.0 / static_cast<double>(task.N)) > 1e-12)
    throw ConfigError("completeness_det: needs 2 eta = 1/N exactly");
  std::vector<int> weights(static_cast<std::size_t>(config.n()));
  for (int l = 0; l < config.n(); ++l) {
    const cplx w = config.Lambda[static_cast<std::size_t>(l)];
    const double rounded = std::round(w.real());
    if (std::abs(w - rounded) > 1e-9 || rounded < 0.0)
      throw ConfigError("completeness_det: weights must be nonnegative integers");
    weights[static_cast<std::size_t>(l)] = static_cast<int>(rounded);
  }

  const ThetaEngine engine(config.elliptic);
  const cplx eta = config.eta();
  const std::vector<Composition> basis = zero_weight_basis(config);
  const int dim = static_cast<int>(basis.size());
  const int total = task.N * dim;
  if (task.expected_count != 0 && task.expected_count != total)
    throw ConfigError("completeness_det: expected_count " +
                      std::to_string(task.expected_count) + " != N * dim V[0] = " +
                      std::to_string(total));

  // Multiplier branches: alpha = (-1)^m e^c fixes c up to 2 pi i shifts; the
  // N distinct branches modulo the lattice of the equations are r = 0..N-1.
  const cplx log_alpha = std::log(task.alpha) +
                         (config.m % 2 != 0 ? cplx(0.0, kPi) : cplx(0.0, 0.0));

  // First-order start positions: every root ladder sits below z_l - a_l, and
  // the distance scale of the correction is e^{-4 eta c}.
  const auto starts_for = [&](cplx c) {
    const cplx small = std::exp(-4.0 * eta * c);
    std::vector<std::vector<cplx>> starts;
    starts.reserve(basis.size());
    for (const Composition& label : basis) {
      std::vector<cplx> t(static_cast<std::size_t>(config.m));
      if (config.m == 1) {
        int site = 0;
        while (label[site] == 0) ++site;
        const cplx anchor = config.z[static_cast<std::size_t>(site)] -
                            config.a(site);
        cplx ratio = engine.theta(-2.0 * config.a(site)) / engine.theta_prime0();
        for (int l = 0; l < config.n(); ++l) {
          if (l == site) continue;
          const cplx base = anchor - config.z[static_cast<std::size_t>(l)];
          ratio *= engine.theta(base - config.a(l)) /
                   engine.theta(base + config.a(l));
        }
        t[0] = anchor + small * ratio;
      } else {
        int j = 0;
        for (int l = 0; l < config.n(); ++l) {
          for (int i = 0; i < label[l]; ++i) {
            t[static_cast<std::size_t>(j)] =
                config.z[static_cast<std::size_t>(l)] - config.a(l) -
                2.0 * eta * static_cast<double>(i) +
                small * (0.05 + 0.01 * static_cast<double>(j));
            ++j;
          }
        }
      }
      starts.push_back(std::move(t));
    }
    return starts;
  };

  CompletenessReport report;
  std::vector<std::vector<BetheSolution>> per_branch(
      static_cast<std::size_t>(task.N));
  for (int r = 0; r < task.N; ++r) {
    const cplx c = log_alpha + cplx(0.0, kTwoPi * static_cast<double>(r));
    std::vector<BetheSolution> sols = bethe_solve(config, c, starts_for(c));
    if (static_cast<int>(sols.size()) > dim) {
      std::sort(sols.begin(), sols.end(),
                [](const BetheSolution& a, const BetheSolution& b) {
                  return a.residual < b.residual;
                });
      sols.resize(static_cast<std::size_t>(dim));
    }
    per_branch[static_cast<std::size_t>(r)] = std::move(sols);
    report.found += static_cast<int>(per_branch[static_cast<std::size_t>(r)].size());
  }
  if (report.found < total) {
    std::ostringstream os;
    os << "completeness_det: found " << report.found << " of " << total
       << " solutions (per branch:";
    for (const auto& sols : per_branch) os << ' ' << sols.size();
    os << ")";
    throw SolutionDeficit(os.str());
  }

  Eigen::MatrixXcd stacked(total, total);
  int col = 0;
  for (const auto& sols : per_branch)
    for (const BetheSolution& sol : sols) {
      for (int r = 0; r < task.N; ++r) {
        const cplx mu = task.mu0 + static_cast<double>(r) /
                                       static_cast<double>(task.N);
        stacked.block(r * dim, col, dim, 1) = bethe_psi(config, sol, mu);
      }
      report.solutions.push_back(sol);
      ++col;
    }

  report.det_abs = std::abs(stacked.determinant());
  double row_scale = 1.0;
  for (int r = 0; r < total; ++r)
    row_scale *= std::max(stacked.row(r).norm(), 1e-300);
  report.det_normalized = report.det_abs / row_scale;

  cplx vandermonde(1.0, 0.0);
  for (int r = 1; r < task.N; ++r)
    for (int s = 0; s < r; ++s)
      vandermonde *= std::exp(cplx(0.0, 2.0 * kTwoPi * r / task.N)) -
                     std::exp(cplx(0.0, 2.0 * kTwoPi * s / task.N));
  report.vandermonde = vandermonde;
  return report;
}

}  // namespace ellipq
