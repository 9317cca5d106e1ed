#include "ellipq/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>

namespace ellipq {

int thread_count() {
  if (const char* env = std::getenv("ELLIPQ_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  const std::size_t nthreads =
      std::min<std::size_t>(static_cast<std::size_t>(thread_count()), count);
  if (nthreads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  std::exception_ptr first_error;
  std::mutex err_mutex;
  for (std::size_t tid = 0; tid < nthreads; ++tid) {
    pool.emplace_back([&, tid]() {
      try {
        for (std::size_t i = tid; i < count; i += nthreads) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

void EllipticParams::validate() const {
  if (!(tau.imag() > 0.0)) throw ConfigError("Im(tau) must be positive");
}

cplx EllipticParams::nome_r() const {
  if (!p) throw ConfigError("step p is not set");
  if (!(p->imag() > 0.0)) throw ConfigError("Im(p) must be positive for the step nome");
  return std::exp(kTwoPi * kI * *p);
}

ThetaEngine::ThetaEngine(cplx tau) : tau_(tau) {
  if (!(tau.imag() > 0.0)) throw ConfigError("Im(tau) must be positive");
  // Truncation: exp(-pi*Im(tau)*(J-1/2)^2) < 1e-18.
  const double target = 18.0 * std::log(10.0) / (kPi * tau.imag());
  cutoff_ = std::max(3, static_cast<int>(std::ceil(0.5 + std::sqrt(target))) + 1);
  coeff_.resize(cutoff_);
  for (int j = 0; j < cutoff_; ++j) {
    double half = j + 0.5;
    cplx c = std::exp(kPi * kI * tau_ * (half * half));
    coeff_[j] = (j % 2 == 0 ? 2.0 : -2.0) * c;
  }
  // theta'(0) from the product formula 2*pi*exp(pi*i*tau/4)*prod_{j>=1}(1-q^j)^3.
  const cplx q = std::exp(kTwoPi * kI * tau_);
  cplx prod = 1.0;
  cplx qj = q;
  while (std::abs(qj) > 1e-20) {
    cplx f = 1.0 - qj;
    prod *= f * f * f;
    qj *= q;
  }
  theta_prime0_ = kTwoPi * std::exp(kPi * kI * tau_ / 4.0) * prod;
}

ThetaEngine::Reduced ThetaEngine::reduce(cplx t) const {
  // Write t = alpha + beta*tau with alpha, beta real; shift by round(beta) in the
  // tau direction and round(alpha) in the real direction, tracking the exact
  // quasi-periodicity factors:
  //   theta(t0 + n + k*tau) = (-1)^(n+k) exp(-2*pi*i*k*t0 - pi*i*k^2*tau) theta(t0).
  const double beta = t.imag() / tau_.imag();
  const double k = std::round(beta);
  const cplx t1 = t - k * tau_;
  const double n = std::round(t1.real());
  const cplx t0 = t1 - n;
  const double sign = (std::fmod(std::abs(n + k), 2.0) < 0.5) ? 1.0 : -1.0;
  const cplx factor = sign * std::exp(-kTwoPi * kI * k * t0 - kPi * kI * (k * k) * tau_);
  return {t0, factor, k};
}

cplx ThetaEngine::series(cplx t0) const {
  cplx sum = 0.0;
  for (int j = 0; j < cutoff_; ++j) {
    sum += coeff_[j] * std::sin((2.0 * j + 1.0) * kPi * t0);
  }
  return sum;
}

cplx ThetaEngine::series_deriv(cplx t0) const {
  cplx sum = 0.0;
  for (int j = 0; j < cutoff_; ++j) {
    sum += coeff_[j] * ((2.0 * j + 1.0) * kPi) * std::cos((2.0 * j + 1.0) * kPi * t0);
  }
  return sum;
}

cplx ThetaEngine::theta(cplx t) const {
  Reduced r = reduce(t);
  return r.factor * series(r.t0);
}

cplx ThetaEngine::theta_deriv(cplx t) const {
  // d/dt of factor(t0(t)) * theta(t0(t)) with dt0/dt = 1:
  // theta'(t) = factor * (theta'(t0) - 2*pi*i*k*theta(t0)).
  Reduced r = reduce(t);
  return r.factor * (series_deriv(r.t0) - kTwoPi * kI * r.k * series(r.t0));
}

cplx ThetaEngine::lattice_reduce_point(cplx x) const {
  const double beta = x.imag() / tau_.imag();
  const double k = std::round(beta);
  cplx y = x - k * tau_;
  y -= std::round(y.real());
  return y;
}

double ThetaEngine::lattice_distance(cplx x) const {
  // Nearest lattice translate of the reduced representative; checking the
  // neighboring cells covers skewed lattices.
  const cplx y = lattice_reduce_point(x);
  double best = std::abs(y);
  for (int dn = -1; dn <= 1; ++dn) {
    for (int dk = -1; dk <= 1; ++dk) {
      best = std::min(best, std::abs(y - cplx(dn, 0) - static_cast<double>(dk) * tau_));
    }
  }
  return best;
}

PhaseEvaluator::PhaseEvaluator(const EllipticParams& params, cplx a, int extra_cutoff)
    : a_(a) {
  params.validate();
  if (!params.p) throw ConfigError("phase function requires the step p");
  tau_ = params.tau;
  p_ = *params.p;
  q_ = params.nome_q();
  r_ = params.nome_r();
  // Keep factors until |r|^j (resp. |q|^k) alone drops below 1e-18.
  const double l10 = std::log(10.0);
  jmax_ = static_cast<int>(std::ceil(18.0 * l10 / (kTwoPi * p_.imag()))) + 1 + extra_cutoff;
  kmax_ = static_cast<int>(std::ceil(18.0 * l10 / (kTwoPi * tau_.imag()))) + 1 + extra_cutoff;
}

cplx PhaseEvaluator::phi(cplx t) const {
  const cplx e_minus = std::exp(kTwoPi * kI * (t - a_));   // E(t-a)
  const cplx e_plus = std::exp(kTwoPi * kI * (t + a_));    // E(t+a)
  const cplx einv_minus = 1.0 / e_minus;
  const cplx einv_plus = 1.0 / e_plus;

  cplx num = 1.0, den = 1.0;
  cplx rj = 1.0;  // r^j
  for (int j = 0; j <= jmax_; ++j, rj *= r_) {
    cplx rq = rj;             // r^j q^k
    cplx rq1 = rj * r_ * q_;  // r^(j+1) q^(k+1)
    for (int k = 0; k <= kmax_; ++k, rq *= q_, rq1 *= q_) {
      const cplx n1 = 1.0 - rq * e_minus;
      const cplx n2 = 1.0 - rq1 * einv_plus;
      const cplx d1 = 1.0 - rq * e_plus;
      const cplx d2 = 1.0 - rq1 * einv_minus;
      if (std::abs(n1) < 1e-13 || std::abs(n2) < 1e-13 || std::abs(d1) < 1e-13 ||
          std::abs(d2) < 1e-13) {
        throw PoleProximity("phase product factor within 1e-13 of zero");
      }
      num *= n1 * n2;
      den *= d1 * d2;
    }
  }
  const cplx prefactor = std::exp(-kTwoPi * kI * a_ * t / p_);
  return prefactor * num / den;
}

}  // namespace ellipq
