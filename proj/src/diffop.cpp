#include "ellipq/diffop.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

#include "ellipq/elliptic.hpp"
#include "ellipq/errors.hpp"
#include "ellipq/util.hpp"

namespace ellipq {
namespace {

int integer_shift(cplx mu, const char* what) {
  const long long s = std::llround(mu.real());
  if (std::abs(mu - cplx(static_cast<double>(s))) > 1e-9) {
    throw ConfigError(std::string(what) + " produces the non-integer shift " +
                      std::to_string(mu.real()) + "+" + std::to_string(mu.imag()) + "i");
  }
  return static_cast<int>(s);
}

int find_label(const std::vector<Composition>& basis, const Composition& c) {
  for (std::size_t i = 0; i < basis.size(); ++i) {
    if (basis[i] == c) return static_cast<int>(i);
  }
  return -1;
}

// Exchange factor on slots (s1, s2) of the given basis, with the dynamical
// argument shifted by the weights of shift_slots resolved per column label.
// A separation on the lattice is the coinciding-point limit: legal for equal
// weights, where the block is the flip.
Eigen::MatrixXcd pair_factor_matrix(RBlockCache& cache, const std::vector<cplx>& weights,
                                    const std::vector<Composition>& basis, int s1, int s2,
                                    const std::vector<int>& shift_slots, cplx x,
                                    cplx lambda) {
  const cplx eta = cache.params().eta;
  const ThetaEngine eng(cache.params().tau);
  const bool coincident = eng.lattice_distance(x) <= 1e-9;
  if (coincident &&
      std::abs(weights[static_cast<std::size_t>(s1)] -
               weights[static_cast<std::size_t>(s2)]) > 1e-9) {
    throw SingularConfiguration("coinciding arguments with unequal weights");
  }
  const Eigen::Index dim = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
  const int nslots = basis.empty() ? 0 : basis.front().size();
  for (Eigen::Index c = 0; c < dim; ++c) {
    const Composition& in = basis[static_cast<std::size_t>(c)];
    cplx drop_weight(0.0);
    for (int i : shift_slots) {
      drop_weight += weights[static_cast<std::size_t>(i)] - 2.0 * static_cast<double>(in[i]);
    }
    const cplx lam = lambda - 2.0 * eta * drop_weight;
    const int drop = in[s1] + in[s2];
    WeightBlockMatrix blk;
    if (coincident) {
      blk.m = drop;
      blk.row_index = enumerate_compositions(2, drop);
      blk.col_index = blk.row_index;
      blk.entries = flip_matrix(blk.row_index, blk.col_index);
    } else {
      blk = cache.get(weights[static_cast<std::size_t>(s1)],
                      weights[static_cast<std::size_t>(s2)], x, lam, drop);
    }
    const int bc = blk.find_col(Composition{{in[s1], in[s2]}});
    for (Eigen::Index r = 0; r < dim; ++r) {
      const Composition& outc = basis[static_cast<std::size_t>(r)];
      bool spectators_match = true;
      for (int i = 0; i < nslots; ++i) {
        if (i != s1 && i != s2 && outc[i] != in[i]) {
          spectators_match = false;
          break;
        }
      }
      if (!spectators_match) continue;
      const int br = blk.find_row(Composition{{outc[s1], outc[s2]}});
      out(r, c) = blk.entries(br, bc);
    }
  }
  return out;
}

// Multiplication operator for the ordered product of the factors
// (pivot, other[0]) (pivot, other[1]) ... at the given arguments.
MatrixFunc factor_product(RBlockCache& cache, std::vector<cplx> weights,
                          std::vector<Composition> basis, int pivot,
                          std::vector<int> others, std::vector<cplx> args) {
  return [&cache, weights = std::move(weights), basis = std::move(basis), pivot,
          others = std::move(others), args = std::move(args)](cplx lambda) -> Eigen::MatrixXcd {
    const Eigen::Index dim = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXcd prod = Eigen::MatrixXcd::Identity(dim, dim);
    for (std::size_t k = 0; k < others.size(); ++k) {
      const int other = others[k];
      std::vector<int> shift_slots;
      for (int i = 0; i < other; ++i) {
        if (i != pivot) shift_slots.push_back(i);
      }
      prod = prod * pair_factor_matrix(cache, weights, basis, pivot, other, shift_slots,
                                       args[k], lambda);
    }
    return prod;
  };
}

void require_zero_weight(const ModelConfig& config) {
  config.validate();
  if (!config.zero_weight_consistent()) {
    throw ConfigError("the weights must satisfy sum Lambda = 2 m");
  }
}

// Ordered factor lists of the j-th connection operator (1-based j):
// left factors at k = j-1 .. 1, right factors at l = n .. j+1.
struct ConnectionFactors {
  std::vector<int> left, right;    // 0-based slot indices
  std::vector<cplx> left_args, right_args;
};

ConnectionFactors connection_factors(const ModelConfig& config, int j, cplx left_offset) {
  const int n = config.n();
  if (j < 1 || j > n) throw ConfigError("factor index out of range");
  ConnectionFactors out;
  const cplx zj = config.z[static_cast<std::size_t>(j - 1)];
  for (int k = j - 1; k >= 1; --k) {
    out.left.push_back(k - 1);
    out.left_args.push_back(zj - config.z[static_cast<std::size_t>(k - 1)] + left_offset);
  }
  for (int l = n; l >= j + 1; --l) {
    out.right.push_back(l - 1);
    out.right_args.push_back(zj - config.z[static_cast<std::size_t>(l - 1)]);
  }
  return out;
}

ShiftOperator build_connection(RBlockCache& cache, const ModelConfig& config, int j,
                               cplx left_offset) {
  require_zero_weight(config);
  const std::vector<Composition> basis = zero_weight_basis(config);
  const cplx two_eta = 2.0 * config.eta();
  const ConnectionFactors fac = connection_factors(config, j, left_offset);
  const ShiftOperator left =
      mult_op(basis, basis, two_eta,
              factor_product(cache, config.Lambda, basis, j - 1, fac.left, fac.left_args));
  const ShiftOperator right =
      mult_op(basis, basis, two_eta,
              factor_product(cache, config.Lambda, basis, j - 1, fac.right, fac.right_args));
  return compose(left, compose(gamma_op(config, j), right));
}

}  // namespace

Eigen::MatrixXcd ShiftOperator::term(int s, cplx lambda) const {
  auto it = terms.find(s);
  if (it == terms.end()) {
    return Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(rows()),
                                  static_cast<Eigen::Index>(cols()));
  }
  return it->second(lambda);
}

ShiftOperator identity_op(std::vector<Composition> basis, cplx two_eta) {
  ShiftOperator out;
  out.codomain = basis;
  out.domain = std::move(basis);
  out.two_eta = two_eta;
  const Eigen::Index dim = static_cast<Eigen::Index>(out.codomain.size());
  out.terms[0] = [dim](cplx) -> Eigen::MatrixXcd {
    return Eigen::MatrixXcd::Identity(dim, dim);
  };
  return out;
}

ShiftOperator mult_op(std::vector<Composition> codomain, std::vector<Composition> domain,
                      cplx two_eta, MatrixFunc mat) {
  ShiftOperator out;
  out.codomain = std::move(codomain);
  out.domain = std::move(domain);
  out.two_eta = two_eta;
  out.terms[0] = std::move(mat);
  return out;
}

ShiftOperator compose(const ShiftOperator& A, const ShiftOperator& B) {
  if (A.domain != B.codomain) {
    throw ConfigError("operator composition needs matching bases");
  }
  if (std::abs(A.two_eta - B.two_eta) > 1e-14) {
    throw ConfigError("operator composition needs a common step");
  }
  ShiftOperator out;
  out.codomain = A.codomain;
  out.domain = B.domain;
  out.two_eta = A.two_eta;
  for (const auto& [s1, a] : A.terms) {
    for (const auto& [s2, b] : B.terms) {
      const int s = s1 + s2;
      // Explicit return types force evaluation of the matrix expressions while
      // their operands are still alive.
      MatrixFunc piece = [a = a, b = b, shift = s1,
                          two_eta = out.two_eta](cplx lambda) -> Eigen::MatrixXcd {
        return a(lambda) * b(lambda - two_eta * static_cast<double>(shift));
      };
      auto it = out.terms.find(s);
      if (it == out.terms.end()) {
        out.terms[s] = std::move(piece);
      } else {
        it->second = [prev = it->second,
                      piece = std::move(piece)](cplx lambda) -> Eigen::MatrixXcd {
          return prev(lambda) + piece(lambda);
        };
      }
    }
  }
  return out;
}

Eigen::VectorXcd apply_op(const ShiftOperator& A, const VectorFunc& f, cplx lambda) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(A.rows()));
  for (const auto& [s, mat] : A.terms) {
    out += mat(lambda) * f(lambda - A.two_eta * static_cast<double>(s));
  }
  return out;
}

double op_equal(const ShiftOperator& A, const ShiftOperator& B, int lambda_samples,
                std::uint64_t seed) {
  if (A.codomain != B.codomain || A.domain != B.domain) {
    throw ConfigError("operator comparison needs matching bases");
  }
  std::vector<int> shifts;
  for (const auto& kv : A.terms) shifts.push_back(kv.first);
  for (const auto& kv : B.terms) {
    if (!A.terms.count(kv.first)) shifts.push_back(kv.first);
  }
  Rng rng(seed);
  std::vector<cplx> samples;
  for (int i = 0; i < lambda_samples; ++i) {
    samples.push_back(rng.box(-0.45, 0.45, 0.03, 0.38));
  }
  std::vector<double> worst(samples.size(), 0.0);
  parallel_for(samples.size(), [&](std::size_t i) {
    for (int s : shifts) {
      const Eigen::MatrixXcd diff = A.term(s, samples[i]) - B.term(s, samples[i]);
      if (diff.size() > 0) {
        worst[i] = std::max(worst[i], diff.cwiseAbs().maxCoeff());
      }
    }
  });
  return *std::max_element(worst.begin(), worst.end());
}

double commutator_residual(const ShiftOperator& A, const ShiftOperator& B,
                           int lambda_samples, std::uint64_t seed) {
  return op_equal(compose(A, B), compose(B, A), lambda_samples, seed);
}

std::vector<Composition> zero_weight_basis(const ModelConfig& config) {
  return weight_space_basis(config, cplx(0.0));
}

ShiftOperator gamma_op(const ModelConfig& config, int j) {
  require_zero_weight(config);
  if (j < 1 || j > config.n()) throw ConfigError("factor index out of range");
  const std::vector<Composition> basis = zero_weight_basis(config);
  const Eigen::Index dim = static_cast<Eigen::Index>(basis.size());
  std::map<int, std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < dim; ++i) {
    const cplx mu = config.Lambda[static_cast<std::size_t>(j - 1)] -
                    2.0 * static_cast<double>(basis[static_cast<std::size_t>(i)][j - 1]);
    groups[integer_shift(mu, "the factor weight")].push_back(i);
  }
  ShiftOperator out;
  out.codomain = basis;
  out.domain = basis;
  out.two_eta = 2.0 * config.eta();
  for (const auto& [s, members] : groups) {
    Eigen::MatrixXcd proj = Eigen::MatrixXcd::Zero(dim, dim);
    for (Eigen::Index i : members) proj(i, i) = 1.0;
    out.terms[s] = [proj](cplx) -> Eigen::MatrixXcd { return proj; };
  }
  return out;
}

ShiftOperator build_H(RBlockCache& cache, const ModelConfig& config, int j) {
  return build_connection(cache, config, j, cplx(0.0));
}

ShiftOperator tilde_h1(RBlockCache& cache, const ModelConfig& config) {
  require_zero_weight(config);
  const std::vector<Composition> basis = zero_weight_basis(config);
  const ConnectionFactors fac = connection_factors(config, 1, cplx(0.0));
  return mult_op(basis, basis, 2.0 * config.eta(),
                 factor_product(cache, config.Lambda, basis, 0, fac.right, fac.right_args));
}

ShiftOperator build_K(RBlockCache& cache, const ModelConfig& config, int j) {
  if (!config.elliptic.p) {
    throw ConfigError("the connection operator needs the step p");
  }
  return build_connection(cache, config, j, *config.elliptic.p);
}

ShiftOperator build_T(RBlockCache& cache, const ModelConfig& config, cplx w) {
  require_zero_weight(config);
  const int n = config.n();
  const cplx L0 = config.Lambda.front();
  for (const cplx& L : config.Lambda) {
    if (std::abs(L - L0) > 1e-12) {
      throw ConfigError("the transfer matrix needs equal weights");
    }
  }
  const int cap = integer_shift(L0, "the auxiliary weight");
  if (cap < 0) throw ConfigError("the auxiliary weight must be nonnegative");
  const std::vector<Composition> basis = zero_weight_basis(config);
  const int m = static_cast<int>(basis.empty() ? 0 : basis.front().total());

  // Extended labels: slot 0 is the auxiliary factor, slots 1..n the sites.
  std::vector<cplx> ext_weights(static_cast<std::size_t>(n) + 1, L0);
  std::vector<int> ext_caps;
  ext_caps.push_back(cap);
  for (int c : config.caps_or_unbounded()) ext_caps.push_back(c);

  ShiftOperator out;
  out.codomain = basis;
  out.domain = basis;
  out.two_eta = 2.0 * config.eta();
  for (int k0 = 0; k0 <= cap; ++k0) {
    const std::vector<Composition> sector =
        enumerate_compositions(n + 1, m + k0, &ext_caps);
    // Positions of (k0, basis[i]) inside the sector.
    std::vector<int> embed(basis.size());
    for (std::size_t i = 0; i < basis.size(); ++i) {
      std::vector<int> parts{k0};
      for (int sslot = 0; sslot < n; ++sslot) parts.push_back(basis[i][sslot]);
      embed[i] = find_label(sector, Composition{parts});
      if (embed[i] < 0) throw ConfigError("truncation caps exclude a basis label");
    }
    std::vector<int> others;
    std::vector<cplx> args;
    for (int l = n; l >= 1; --l) {
      others.push_back(l);
      args.push_back(w - config.z[static_cast<std::size_t>(l - 1)]);
    }
    const MatrixFunc big =
        factor_product(cache, ext_weights, sector, 0, others, args);
    const Eigen::Index dim = static_cast<Eigen::Index>(basis.size());
    out.terms[cap - 2 * k0] = [big, embed, dim](cplx lambda) -> Eigen::MatrixXcd {
      const Eigen::MatrixXcd G = big(lambda);
      Eigen::MatrixXcd M(dim, dim);
      for (Eigen::Index r = 0; r < dim; ++r) {
        for (Eigen::Index c = 0; c < dim; ++c) {
          M(r, c) = G(embed[static_cast<std::size_t>(r)],
                      embed[static_cast<std::size_t>(c)]);
        }
      }
      return M;
    };
  }
  return out;
}

ShiftOperator exchange_op(RBlockCache& cache, const ModelConfig& config, int j) {
  require_zero_weight(config);
  if (j < 1 || j >= config.n()) throw ConfigError("exchange index out of range");
  const std::vector<Composition> basis = zero_weight_basis(config);
  const std::vector<Composition> swapped_basis = zero_weight_basis(config.swapped(j - 1));
  const cplx x = config.z[static_cast<std::size_t>(j - 1)] -
                 config.z[static_cast<std::size_t>(j)];
  std::vector<int> shift_slots;
  for (int i = 0; i < j - 1; ++i) shift_slots.push_back(i);
  MatrixFunc mat = [&cache, weights = config.Lambda, basis, swapped_basis, j, x,
                    shift_slots](cplx lambda) -> Eigen::MatrixXcd {
    const Eigen::MatrixXcd F = pair_factor_matrix(cache, weights, basis, j - 1, j,
                                                  shift_slots, x, lambda);
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(
        static_cast<Eigen::Index>(swapped_basis.size()),
        static_cast<Eigen::Index>(basis.size()));
    for (std::size_t r = 0; r < basis.size(); ++r) {
      std::vector<int> flipped = basis[r].parts;
      std::swap(flipped[static_cast<std::size_t>(j - 1)],
                flipped[static_cast<std::size_t>(j)]);
      const int rr = find_label(swapped_basis, Composition{flipped});
      if (rr < 0) throw ConfigError("swapped basis misses a flipped label");
      out.row(rr) = F.row(static_cast<Eigen::Index>(r));
    }
    return out;
  };
  return mult_op(swapped_basis, basis, 2.0 * config.eta(), std::move(mat));
}

ExchangeReport verify_exchange(RBlockCache& cache, const ModelConfig& config, int j,
                               int lambda_samples, std::uint64_t seed) {
  const ModelConfig swapped = config.swapped(j - 1);
  const ShiftOperator S = exchange_op(cache, config, j);
  const ShiftOperator S_back = exchange_op(cache, swapped, j);
  const ShiftOperator Hj = build_H(cache, config, j);
  const ShiftOperator Hj1 = build_H(cache, swapped, j + 1);
  ExchangeReport rep;
  rep.intertwine = op_equal(compose(Hj1, S), compose(S, Hj), lambda_samples, seed);
  rep.inverse = op_equal(compose(S_back, S),
                         identity_op(zero_weight_basis(config), 2.0 * config.eta()),
                         lambda_samples, seed);
  return rep;
}

double flatness_residual(RBlockCache& cache, const ModelConfig& config, int i, int j,
                         int lambda_samples, std::uint64_t seed) {
  if (!config.elliptic.p) {
    throw ConfigError("the connection operator needs the step p");
  }
  const cplx p = *config.elliptic.p;
  const ShiftOperator lhs = compose(build_K(cache, config.shifted_z(j - 1, p), i),
                                    build_K(cache, config, j));
  const ShiftOperator rhs = compose(build_K(cache, config.shifted_z(i - 1, p), j),
                                    build_K(cache, config, i));
  return op_equal(lhs, rhs, lambda_samples, seed);
}

}  // namespace ellipq
