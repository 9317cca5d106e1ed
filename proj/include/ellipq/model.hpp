// Model configuration (highest weights, evaluation points) and the composition
// combinatorics indexing every tensor basis and residue functional.
#pragma once

#include <optional>
#include <vector>

#include "ellipq/elliptic.hpp"
#include "ellipq/errors.hpp"
#include "ellipq/util.hpp"

namespace ellipq {

// An n-part nonnegative integer composition (j_1..j_n); indexes the basis
// vector e_{j_1} x ... x e_{j_n} and the matching residue functional.
struct Composition {
  std::vector<int> parts;

  Composition() = default;
  explicit Composition(std::vector<int> p) : parts(std::move(p)) {}

  int size() const { return static_cast<int>(parts.size()); }
  int total() const;
  int operator[](int i) const { return parts[static_cast<std::size_t>(i)]; }
  bool operator==(const Composition& o) const { return parts == o.parts; }
  bool operator<(const Composition& o) const { return parts < o.parts; }
  std::string str() const;  // "(j1,j2,...)"
};

// All compositions of m into n parts, lexicographically ascending.
// With caps, parts are bounded per index (caps[i] < 0 means unbounded).
std::vector<Composition> enumerate_compositions(int n, int m,
                                                const std::vector<int>* caps = nullptr);

struct ModelConfig {
  EllipticParams elliptic;
  std::vector<cplx> Lambda;  // highest weights
  std::vector<cplx> z;       // evaluation points
  int m = 0;                 // number of t-variables (total weight drop)
  // Per-factor cap for finite-dimensional quotients; disengaged when empty.
  std::vector<std::optional<int>> truncation;
  // Opt-in for deliberately coinciding evaluation points (coalescence
  // diagnostics); skips the pairwise z-separation check in validate().
  bool allow_coincident_z = false;

  int n() const { return static_cast<int>(Lambda.size()); }
  cplx eta() const { return elliptic.eta; }
  cplx a(int l) const { return elliptic.eta * Lambda[static_cast<std::size_t>(l)]; }
  std::vector<cplx> a_all() const;
  cplx lambda_sum() const;

  // Throws ConfigError unless: sizes match, n >= 1, Im tau > 0, and the z_i
  // are pairwise separated by > 1e-6 modulo the lattice (separation waived
  // when allow_coincident_z is set).
  void validate() const;
  // |sum Lambda - 2m| within 1e-12 (zero-weight-space computations need it).
  bool zero_weight_consistent() const;
  // Caps vector for enumerate_compositions (-1 where unbounded).
  std::vector<int> caps_or_unbounded() const;

  // Copy with factors j and j+1 swapped (weights, points, caps); 0-based j.
  ModelConfig swapped(int j) const;
  // Copy with z_j shifted by delta; 0-based j.
  ModelConfig shifted_z(int j, cplx delta) const;
};

// All compositions (respecting truncation caps) whose indexed basis vector has
// h-weight sum_i (Lambda_i - 2 j_i) equal to target. Throws UnreachableWeight
// if (sum Lambda - target)/2 is not a nonnegative integer within 1e-9.
std::vector<Composition> weight_space_basis(const ModelConfig& config, cplx target_weight);

// h-weight of the basis vector indexed by comp: sum_i (Lambda_i - 2 j_i).
cplx composition_weight(const ModelConfig& config, const Composition& comp);
// Partial weight sum_{l<k} (Lambda_l - 2 j_l) (0-based k: slots 0..k-1).
cplx partial_weight(const ModelConfig& config, const Composition& comp, int k);

}  // namespace ellipq
