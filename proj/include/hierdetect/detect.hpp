#pragma once

#include <optional>

#include "hierdetect/hier_core.hpp"
#include "hierdetect/measure.hpp"

namespace hierdetect {

enum class StopRule {
  /// Stop once the hierarchical support repeats (and, for HiIHT, the iterate
  /// has also settled). Always backstopped by max_iters.
  SupportFixedPoint,
  /// Stop when ||y - A h|| <= residual_tolerance * ||y||.
  ResidualTolerance,
  /// Always run max_iters iterations.
  MaxIters,
};

struct DetectorConfig {
  std::size_t max_iters = 50;
  StopRule stop_rule = StopRule::SupportFixedPoint;
  double residual_tolerance = 1e-10;
  /// Relative tolerance on the normal-equation residual of the inner solve.
  double ls_tolerance = 1e-10;
  std::size_t ls_max_iters = 200;
  /// HiIHT only: relative step size ||h_{t+1} - h_t|| / ||h_{t+1}|| below which
  /// a repeated support counts as a fixed point.
  double step_tolerance = 1e-10;
  /// Energy threshold on squared block norms.
  double xi = 0.0;

  void validate() const;
};

struct DetectionOutcome {
  HierVector h_hat;
  std::vector<std::size_t> active_users;
  std::size_t iterations = 0;
  std::vector<HierSupport> support_history;
  std::vector<double> residual_history;
  /// False if any inner least-squares solve hit ls_max_iters.
  bool ls_converged = true;
};

struct LeastSquaresResult {
  HierVector h;
  std::size_t iterations = 0;
  bool converged = true;
  double residual = 0.0;
};

class underdetermined_support : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Minimum-norm least-squares solution of min ||y - A z|| over z supported on
/// `support`, by conjugate gradients on the restricted normal equations.
/// Throws underdetermined_support if the support has more than m entries.
LeastSquaresResult restricted_least_squares(const FourierMeasurement& a, std::span<const cplx> y,
                                            const HierSupport& support, const ProblemDims& dims,
                                            const DetectorConfig& cfg);

/// Hierarchical hard thresholding pursuit.
DetectionOutcome hihtp(const FourierMeasurement& a, std::span<const cplx> y, const ProblemDims& dims,
                       const DetectorConfig& cfg);

/// Hierarchical iterative hard thresholding.
DetectionOutcome hiiht(const FourierMeasurement& a, std::span<const cplx> y, const ProblemDims& dims,
                       const DetectorConfig& cfg);

/// Users declared active from a sparse estimate: blocks of `support` whose
/// squared norm reaches `xi`. For xi > 0 this coincides with
/// block_threshold(h_hat, xi); at xi = 0 it keeps exactly the support blocks.
std::vector<std::size_t> detect_users(const HierVector& h_hat, const HierSupport& support, double xi,
                                      const ProblemDims& dims);

enum class CorrelatorMode { Signature, IdealOrthogonal };

/// Blocks declared active from per-user correlation energies. xi > 0
/// thresholds (inclusive); xi == 0 returns the k_u largest statistics with
/// ties to the lower index.
std::vector<std::size_t> select_users(std::span<const double> statistics, double xi, std::size_t k_u);

/// Block correlation detector on a full-length received vector y = D(p) h + e.
std::vector<std::size_t> block_correlator(std::span<const cplx> y, const SignatureSet& sig, const ProblemDims& dims,
                                          double xi);

/// Per-user statistics of the correlator with ideal shift-orthogonal
/// signatures: ||n h_i + sqrt(n) e_i||^2 with e_i ~ CN(0, sigma2 I_s).
std::vector<double> ideal_orthogonal_statistics(const HierVector& h, double sigma2, const ProblemDims& dims,
                                                Rng& rng);

}  // namespace hierdetect
