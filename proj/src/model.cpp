#include "ellipq/model.hpp"

#include <numeric>
#include <string>

namespace ellipq {

int Composition::total() const {
  return std::accumulate(parts.begin(), parts.end(), 0);
}

std::string Composition::str() const {
  std::string s = "(";
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(parts[i]);
  }
  return s + ")";
}

namespace {
void enumerate_rec(int n, int m, const std::vector<int>* caps, std::vector<int>& cur,
                   std::vector<Composition>& out) {
  const int slot = static_cast<int>(cur.size());
  if (slot == n - 1) {
    const int cap = caps ? (*caps)[static_cast<std::size_t>(slot)] : -1;
    if (cap < 0 || m <= cap) {
      cur.push_back(m);
      out.emplace_back(cur);
      cur.pop_back();
    }
    return;
  }
  const int cap = caps ? (*caps)[static_cast<std::size_t>(slot)] : -1;
  const int hi = (cap < 0) ? m : std::min(cap, m);
  for (int j = 0; j <= hi; ++j) {
    cur.push_back(j);
    enumerate_rec(n, m - j, caps, cur, out);
    cur.pop_back();
  }
}
}  // namespace

std::vector<Composition> enumerate_compositions(int n, int m, const std::vector<int>* caps) {
  if (n < 1) throw ConfigError("compositions need at least one part");
  if (m < 0) throw ConfigError("composition total must be nonnegative");
  std::vector<Composition> out;
  std::vector<int> cur;
  cur.reserve(static_cast<std::size_t>(n));
  enumerate_rec(n, m, caps, cur, out);
  return out;
}

std::vector<cplx> ModelConfig::a_all() const {
  std::vector<cplx> out(Lambda.size());
  for (std::size_t i = 0; i < Lambda.size(); ++i) out[i] = elliptic.eta * Lambda[i];
  return out;
}

cplx ModelConfig::lambda_sum() const {
  return std::accumulate(Lambda.begin(), Lambda.end(), cplx(0.0));
}

void ModelConfig::validate() const {
  elliptic.validate();
  if (Lambda.empty()) throw ConfigError("at least one tensor factor is required");
  if (Lambda.size() != z.size()) throw ConfigError("Lambda and z must have equal length");
  if (!truncation.empty() && truncation.size() != Lambda.size()) {
    throw ConfigError("truncation must be empty or match the factor count");
  }
  if (m < 0) throw ConfigError("m must be nonnegative");
  if (!allow_coincident_z) {
    ThetaEngine eng(elliptic.tau);
    for (std::size_t i = 0; i < z.size(); ++i) {
      for (std::size_t j = i + 1; j < z.size(); ++j) {
        if (eng.lattice_distance(z[i] - z[j]) <= 1e-6) {
          throw ConfigError("evaluation points z must be separated by > 1e-6 mod the lattice");
        }
      }
    }
  }
}

bool ModelConfig::zero_weight_consistent() const {
  return std::abs(lambda_sum() - 2.0 * static_cast<double>(m)) <=
         1e-12 * (1.0 + std::abs(lambda_sum()));
}

std::vector<int> ModelConfig::caps_or_unbounded() const {
  std::vector<int> caps(Lambda.size(), -1);
  for (std::size_t i = 0; i < truncation.size(); ++i) {
    if (truncation[i]) caps[i] = *truncation[i];
  }
  return caps;
}

ModelConfig ModelConfig::swapped(int j) const {
  ModelConfig out = *this;
  std::swap(out.Lambda[static_cast<std::size_t>(j)], out.Lambda[static_cast<std::size_t>(j) + 1]);
  std::swap(out.z[static_cast<std::size_t>(j)], out.z[static_cast<std::size_t>(j) + 1]);
  if (!out.truncation.empty()) {
    std::swap(out.truncation[static_cast<std::size_t>(j)],
              out.truncation[static_cast<std::size_t>(j) + 1]);
  }
  return out;
}

ModelConfig ModelConfig::shifted_z(int j, cplx delta) const {
  ModelConfig out = *this;
  out.z[static_cast<std::size_t>(j)] += delta;
  return out;
}

std::vector<Composition> weight_space_basis(const ModelConfig& config, cplx target_weight) {
  const cplx need = (config.lambda_sum() - target_weight) / 2.0;
  const double rounded = std::round(need.real());
  if (std::abs(need.imag()) > 1e-9 || std::abs(need.real() - rounded) > 1e-9 ||
      rounded < -0.5) {
    throw UnreachableWeight("(sum Lambda - target)/2 = " + std::to_string(need.real()) +
                            (need.imag() >= 0 ? "+" : "") + std::to_string(need.imag()) +
                            "i is not a nonnegative integer");
  }
  const int mm = static_cast<int>(rounded);
  const std::vector<int> caps = config.caps_or_unbounded();
  return enumerate_compositions(config.n(), mm, &caps);
}

cplx composition_weight(const ModelConfig& config, const Composition& comp) {
  cplx w = 0.0;
  for (int i = 0; i < comp.size(); ++i) {
    w += config.Lambda[static_cast<std::size_t>(i)] - 2.0 * comp[i];
  }
  return w;
}

cplx partial_weight(const ModelConfig& config, const Composition& comp, int k) {
  cplx w = 0.0;
  for (int l = 0; l < k; ++l) {
    w += config.Lambda[static_cast<std::size_t>(l)] - 2.0 * comp[l];
  }
  return w;
}

}  // namespace ellipq
