#include "hierdetect/bounds.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace hierdetect::bounds {

namespace {

double lchoose(double n, double k) { return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0); }

double log_sum_exp(const std::vector<double>& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

}  // namespace

void BoundParams::validate() const {
  dims.validate();
  if (!(snr > 0.0)) throw std::invalid_argument("BoundParams: snr must be positive");
  if (!(tau > 0.0)) throw std::invalid_argument("BoundParams: tau must be positive");
  if (!(xi >= 0.0)) throw std::invalid_argument("BoundParams: xi must be non-negative");
  if (!(epsilon > 0.0)) throw std::invalid_argument("BoundParams: epsilon must be positive");
  if (!(rip_C >= 0.0) || !(rip_c > 0.0) || !(srip_c > 0.0))
    throw std::invalid_argument("BoundParams: rip_C must be >= 0, rip_c and srip_c > 0");
  if (!(sigma_h2 > 0.0)) throw std::invalid_argument("BoundParams: sigma_h2 must be positive");
}

double BoundReport::term(const std::string& name) const {
  for (const auto& [k, v] : terms)
    if (k == name) return v;
  throw std::out_of_range("BoundReport: no term named " + name);
}

void BoundReport::add(std::string name, double value) {
  terms.emplace_back(std::move(name), value);
  total += value;
  clipped = std::min(total, 1.0);
}

double log_b1(std::size_t m, std::size_t k_s) {
  if (m < 1 || k_s < 1) throw std::invalid_argument("b1: m and k_s must be >= 1");
  const double md = static_cast<double>(m);
  const double kd = static_cast<double>(k_s);
  return std::log(md) - std::log(kd) + lchoose(md + kd - 1.0, kd - 1.0);
}

double b1(std::size_t m, std::size_t k_s) { return std::exp(log_b1(m, k_s)); }

double b1_series(std::size_t m, std::size_t k_s) {
  if (m < 1 || k_s < 1) throw std::invalid_argument("b1: m and k_s must be >= 1");
  // term_j = Gamma(k_s + j) / (Gamma(k_s) j!), term_0 = 1
  double term = 1.0;
  double sum = 1.0;
  for (std::size_t j = 1; j < m; ++j) {
    term *= static_cast<double>(k_s + j - 1) / static_cast<double>(j);
    sum += term;
  }
  return sum;
}

double b0(std::size_t s, std::size_t u, std::size_t k_s, std::size_t u_max) {
  if (s < 2 || u < 2 || k_s < 1) throw std::invalid_argument("b0: need s >= 2, u >= 2, k_s >= 1");
  if (u > u_max) throw std::invalid_argument("b0: u exceeds u_max = " + std::to_string(u_max));
  const double kd = static_cast<double>(k_s);
  const double log_s = std::log(static_cast<double>(s));
  const double ninf = -std::numeric_limits<double>::infinity();

  // log of 1/j!, j = 1..s-1 (index 0 unused)
  std::vector<double> log_a(s, ninf);
  for (std::size_t j = 1; j < s; ++j) log_a[j] = -std::lgamma(static_cast<double>(j) + 1.0);

  // log c_i[J]: i-fold convolution of a with itself, J in [i, i(s-1)]
  std::vector<double> log_c = log_a;
  std::vector<double> log_terms;
  std::vector<int> signs;
  std::vector<double> buf;

  for (std::size_t i = 1; i + 1 <= u; ++i) {
    buf.clear();
    for (std::size_t J = i; J < log_c.size(); ++J) {
      if (!std::isfinite(log_c[J])) continue;
      const double jd = static_cast<double>(J);
      buf.push_back(log_c[J] + std::lgamma(jd + kd) - (jd + kd) * log_s);
    }
    const double log_inner = log_sum_exp(buf);
    log_terms.push_back(lchoose(static_cast<double>(u - 1), static_cast<double>(i)) + log_inner - std::lgamma(kd));
    signs.push_back(i % 2 == 1 ? 1 : -1);

    if (i + 1 == u) break;
    const std::size_t next_len = (i + 1) * (s - 1) + 1;
    std::vector<double> next(next_len, ninf);
    std::vector<double> acc;
    for (std::size_t J = i + 1; J < next_len; ++J) {
      acc.clear();
      const std::size_t j_lo = J >= log_c.size() ? J - (log_c.size() - 1) : 1;
      for (std::size_t j = std::max<std::size_t>(j_lo, 1); j < s && j <= J; ++j) {
        const std::size_t rest = J - j;
        if (rest < log_c.size() && std::isfinite(log_c[rest])) acc.push_back(log_c[rest] + log_a[j]);
      }
      if (!acc.empty()) next[J] = log_sum_exp(acc);
    }
    log_c = std::move(next);
  }

  const double top = *std::max_element(log_terms.begin(), log_terms.end());
  long double sum = 0.0L;
  for (std::size_t k = 0; k < log_terms.size(); ++k)
    sum += static_cast<long double>(signs[k]) * std::exp(static_cast<long double>(log_terms[k] - top));
  const double result = static_cast<double>(sum) * std::exp(top);
  if (!(std::abs(result) * 1e12 >= std::exp(top)))
    throw cancellation_error("b0: alternating sum lost precision (largest term " + std::to_string(std::exp(top)) +
                             ", result " + std::to_string(result) + "); use a high-precision evaluation");
  return result;
}

double chi_sq_ccdf(double x, std::size_t m, double sigma2) {
  if (!(x >= 0.0) || m < 1 || !(sigma2 > 0.0)) throw std::invalid_argument("chi_sq_ccdf: need x >= 0, m >= 1, sigma2 > 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(static_cast<double>(m), x / sigma2);
}

double channel_norm_cdf(double xi, std::size_t k_s, double sigma_h2, CdfMode mode) {
  if (!(xi >= 0.0) || k_s < 1 || !(sigma_h2 > 0.0))
    throw std::invalid_argument("channel_norm_cdf: need xi >= 0, k_s >= 1, sigma_h2 > 0");
  const double kd = static_cast<double>(k_s);
  if (mode == CdfMode::SmallXiApprox) return std::exp(kd * std::log(xi / sigma_h2) - std::lgamma(kd + 1.0));
  if (xi == 0.0) return 0.0;
  if (std::isinf(xi)) return 1.0;
  return boost::math::gamma_p(kd, xi / sigma_h2);
}

double noisy_channel_norm_cdf(double xi, std::size_t k_s, double sigma_h2, double sigma2, std::size_t m,
                              std::size_t n) {
  if (!(sigma2 >= 0.0) || m < 1 || n < 1) throw std::invalid_argument("noisy_channel_norm_cdf: invalid noise inputs");
  const double nd = static_cast<double>(n);
  return channel_norm_cdf(xi, k_s, sigma_h2 + sigma2 * static_cast<double>(m) / (nd * nd), CdfMode::Exact);
}

double rip_failure_bound(const BoundParams& p) {
  p.validate();
  if (p.rip_C == 0.0) return 0.0;
  const auto& d = p.dims;
  const double ks = static_cast<double>(d.k_s), ku = static_cast<double>(d.k_u);
  const double log_v = std::log(p.rip_C) + ks * (1.0 + std::log(static_cast<double>(d.s) / ks)) +
                       ku * (1.0 + std::log(static_cast<double>(d.u) / ku)) - p.rip_c * static_cast<double>(d.m);
  return std::exp(log_v);
}

PfaBound pfa_bound(const BoundParams& p) {
  p.validate();
  const double arg = p.snr * static_cast<double>(p.dims.n) * p.xi / (p.tau * p.tau * static_cast<double>(p.dims.m));
  if (arg <= 1.0) return {1.0, false};
  const double v = std::exp(-(arg - 1.0) * (arg - 1.0) * static_cast<double>(p.dims.m) / 2.0);
  return {std::clamp(v, 0.0, 1.0), true};
}

BoundReport pmd_bound_thm2(const BoundParams& p, CdfMode cdf) {
  p.validate();
  const auto& d = p.dims;
  const double ks = static_cast<double>(d.k_s);
  BoundReport r;
  r.add("rip", rip_failure_bound(p));
  r.add("threshold", channel_norm_cdf(4.0 * p.xi, d.k_s, p.sigma_h2, cdf));
  const double log_div = ks * std::log(4.0 * p.tau * p.tau) - ks * std::log(static_cast<double>(d.n)) -
                         ks * std::log(p.snr) + log_b1(d.m, d.k_s);
  r.add("diversity", std::exp(log_div));
  return r;
}

BoundReport srip_failure_bound(const BoundParams& p) {
  p.validate();
  const auto& d = p.dims;
  const double ks = static_cast<double>(d.k_s), ku = static_cast<double>(d.k_u);
  const double n = static_cast<double>(d.n), m = static_cast<double>(d.m);
  BoundReport r;
  const double log_t1 = std::log(32.0 * static_cast<double>(d.u) * ks) + ks * (1.0 + std::log(static_cast<double>(d.s) / ks)) -
                        p.epsilon * p.epsilon * m / (p.srip_c * 4.0 * std::pow(ku, 4) * std::pow(ks, 5));
  r.add("concentration", std::exp(log_t1));
  const double log_t2 = std::log(32.0 * ks / std::numbers::sqrt2) - ku * ks * std::log(p.snr) - 2.0 * ks * std::log(n) +
                        ku * ks * (4.0 * std::log(ku) + 5.0 * std::log(ks) - (1.0 - 3.0 / ku) * std::log(n));
  r.add("snr", std::exp(log_t2));
  r.add("signal_norm", 4.0 * std::exp(-ku * ks / 2.0));
  if (d.k_u < 8 || d.k_s < 3) {
    r.applicable = false;
    r.note = "stated for k_u >= 8 and k_s >= 3";
  }
  return r;
}

BoundReport pmd_bound_thm4(const BoundParams& p) {
  p.validate();
  const auto& d = p.dims;
  const double ks = static_cast<double>(d.k_s);
  const double s = static_cast<double>(d.s), u = static_cast<double>(d.u), ku = static_cast<double>(d.k_u);
  const double n = static_cast<double>(d.n), m = static_cast<double>(d.m);
  const auto srip = srip_failure_bound(p);
  BoundReport r;
  r.add("srip", srip.total);
  r.applicable = srip.applicable;
  r.note = srip.note;
  const double inactive = u - ku;
  if (inactive == 0.0) {
    r.add("threshold", 0.0);
    r.add("diversity", 0.0);
    return r;
  }
  const double fz = noisy_channel_norm_cdf(p.xi + 4.0 * p.epsilon, d.k_s, p.sigma_h2, 1.0 / p.snr, d.m, d.n);
  r.add("threshold", 2.0 * s * inactive * fz);
  const double log_div = -ks * std::log(n) - ks * std::log(p.snr) - ks * std::log(u * s / (2.0 * ks * m)) +
                         std::log(s * inactive);
  r.add("diversity", std::exp(log_div));
  return r;
}

double correlator_pmd_bound(std::size_t s, std::size_t u, std::size_t k_s, std::size_t n, double snr) {
  if (!(snr > 0.0) || n < 1) throw std::invalid_argument("correlator_pmd_bound: need snr > 0 and n >= 1");
  const double c = b0(s, u, k_s);
  if (!(c > 0.0)) throw std::domain_error("correlator_pmd_bound: B0 = " + std::to_string(c) + " is not positive");
  return -static_cast<double>(k_s) * std::log1p(static_cast<double>(n) * snr) + std::log(c);
}

double prop_max_approx(std::size_t u, std::size_t m, std::size_t k_s, double sigma2,
                       const std::vector<double>& sigma_h2_list) {
  if (sigma_h2_list.size() != k_s) throw std::invalid_argument("prop_max_approx: need one tap power per path");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("prop_max_approx: sigma2 must be positive");
  double log_v = std::log(static_cast<double>(u)) + static_cast<double>(k_s) * std::log(sigma2) + log_b1(m, k_s);
  for (double p : sigma_h2_list) {
    if (!(p > 0.0)) throw std::invalid_argument("prop_max_approx: tap powers must be positive");
    log_v -= std::log(p);
  }
  return std::exp(log_v);
}

double rate_lower_bound(std::size_t k_s, double snr, double tau, std::size_t m, std::size_t n, double sigma2,
                        RateUnit unit) {
  if (!(snr > 0.0) || !(tau > 0.0) || !(sigma2 > 0.0) || m < 1 || n < 1)
    throw std::invalid_argument("rate_lower_bound: inputs must be positive");
  const double nats = std::log1p(static_cast<double>(k_s) * snr) -
                      std::log1p(tau * tau * static_cast<double>(m) * sigma2 / static_cast<double>(n));
  return unit == RateUnit::Bits ? nats / std::numbers::ln2 : nats;
}

double pbe_bound(double pmd, double pfa, std::size_t k_u) {
  if (!(pmd >= 0.0 && pmd <= 1.0) || !(pfa >= 0.0 && pfa <= 1.0))
    throw std::invalid_argument("pbe_bound: probabilities must lie in [0, 1]");
  return std::min(1.0, static_cast<double>(k_u) * pmd + pfa);
}

std::size_t sufficient_measurements(const ProblemDims& dims, ScalingMode mode, double constant) {
  if (dims.u == 0 || dims.s == 0 || dims.k_u == 0 || dims.k_s == 0 || dims.n == 0)
    throw std::invalid_argument("sufficient_measurements: dimensions must be positive");
  if (!(constant >= 0.0)) throw std::invalid_argument("sufficient_measurements: constant must be >= 0");
  const double ku = static_cast<double>(dims.k_u), ks = static_cast<double>(dims.k_s);
  double expr = 0.0;
  if (mode == ScalingMode::Thm1Scaling) {
    expr = ku * std::log(static_cast<double>(dims.u) / ku) + ku * ks * std::log(static_cast<double>(dims.s) / ks);
  } else {
    expr = std::pow(ku, 4) * std::pow(ks, 6) * std::log(static_cast<double>(dims.n));
  }
  return static_cast<std::size_t>(std::ceil(std::max(0.0, constant * expr)));
}

}  // namespace hierdetect::bounds
