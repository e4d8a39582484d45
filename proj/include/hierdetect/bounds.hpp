#pragma once

#include <map>
#include <string>
#include <vector>

#include "hierdetect/hier_core.hpp"

namespace hierdetect::bounds {

/// Inputs shared by the missed-detection and false-alarm bounds. `snr` is
/// linear (1/sigma^2 with unit channel power); `tau` is the noise enhancement
/// of the recovery algorithm; `rip_C`/`rip_c` the constants of the
/// hierarchical RIP failure bound; `srip_c` scales the exponent denominator
/// of the subsampled-Fourier energy concentration bound.
struct BoundParams {
  ProblemDims dims;
  double snr = 1.0;
  double tau = 1.0;
  double xi = 0.0;
  double epsilon = 0.05;
  double rip_C = 1.0;
  double rip_c = 0.05;
  double srip_c = 1.0;
  double sigma_h2 = 1.0;

  void validate() const;
};

/// Additive breakdown of a bound. `terms` keeps insertion order.
struct BoundReport {
  std::vector<std::pair<std::string, double>> terms;
  double total = 0.0;
  double clipped = 0.0;
  /// False when the inputs fall outside the regime the formula is stated for.
  bool applicable = true;
  std::string note;

  double term(const std::string& name) const;
  void add(std::string name, double value);
};

class cancellation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// B1(m, k_s) = sum_{j<m} Gamma(k_s + j) / (Gamma(k_s) j!) = (m/k_s) C(m+k_s-1, k_s-1).
double b1(std::size_t m, std::size_t k_s);
double log_b1(std::size_t m, std::size_t k_s);
/// Direct summation of the defining series; kept for cross-checks.
double b1_series(std::size_t m, std::size_t k_s);

/// Correlator constant B0(s, u, k_s) via repeated convolution of the
/// coefficient sequence 1/j!, j = 1..s-1, in log arithmetic. The sign of the
/// alternating sum is kept: for some (s, u, k_s) with k_s >= 3 it is negative.
/// Throws cancellation_error when the largest term exceeds 1e12 |result| and
/// std::invalid_argument when u exceeds `u_max`.
double b0(std::size_t s, std::size_t u, std::size_t k_s, std::size_t u_max = 64);

/// P(||z||^2 > x) for z ~ CN(0, sigma2 I_m), i.e. Q(m, x/sigma2).
double chi_sq_ccdf(double x, std::size_t m, double sigma2);

enum class CdfMode { Exact, SmallXiApprox };

/// F(xi) = P(||h_i||^2 <= xi) for k_s unit-power taps; the approximation is
/// the leading term xi^k_s / (k_s Gamma(k_s) sigma_h2^k_s).
double channel_norm_cdf(double xi, std::size_t k_s, double sigma_h2, CdfMode mode = CdfMode::Exact);

/// F^z(xi): same with the per-tap variance increased by sigma2 m / n^2.
double noisy_channel_norm_cdf(double xi, std::size_t k_s, double sigma_h2, double sigma2, std::size_t m,
                              std::size_t n);

double rip_failure_bound(const BoundParams& p);

/// False-alarm bound; `applicable` is false when SNR n xi / (tau^2 m) <= 1,
/// in which case the value is 1.
struct PfaBound {
  double value = 1.0;
  bool applicable = false;
};
PfaBound pfa_bound(const BoundParams& p);

/// Missed detection via the hierarchical RIP route: rip + threshold + diversity.
BoundReport pmd_bound_thm2(const BoundParams& p, CdfMode cdf = CdfMode::Exact);

/// Failure probability of uniform block-energy recovery by the first linear
/// estimate: three terms, applicable for k_u >= 8 and k_s >= 3.
BoundReport srip_failure_bound(const BoundParams& p);

/// Missed detection via the energy-concentration route.
BoundReport pmd_bound_thm4(const BoundParams& p);

/// log P_md of the block correlator with orthogonal signatures at xi = 0:
/// -k_s log(1 + n snr) + log B0(s, u, k_s). Throws std::domain_error when B0
/// is not positive.
double correlator_pmd_bound(std::size_t s, std::size_t u, std::size_t k_s, std::size_t n, double snr);

/// Leading high-SNR term of P(max_j ||z_j||^2 >= ||h_i||^2),
/// u sigma2^k_s B1(m, k_s) / prod(sigma_h2_list).
double prop_max_approx(std::size_t u, std::size_t m, std::size_t k_s, double sigma2,
                       const std::vector<double>& sigma_h2_list);

enum class RateUnit { Nats, Bits };
double rate_lower_bound(std::size_t k_s, double snr, double tau, std::size_t m, std::size_t n, double sigma2,
                        RateUnit unit = RateUnit::Nats);

/// min(1, k_u pmd + pfa)
double pbe_bound(double pmd, double pfa, std::size_t k_u);

enum class ScalingMode { Thm1Scaling, Lemma1Scaling };
std::size_t sufficient_measurements(const ProblemDims& dims, ScalingMode mode, double constant = 1.0);

}  // namespace hierdetect::bounds
