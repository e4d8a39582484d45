#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hierdetect/bounds.hpp"
#include "hierdetect/detect.hpp"

namespace hierdetect::sim {

struct ChannelPrior {
  ProblemDims dims;
  double sigma_h2 = 1.0;
  /// Exactly k_u active blocks with exactly k_s taps each; otherwise the
  /// counts are drawn uniformly from [1, k_u] and [1, k_s].
  bool exact_sparsity = true;
};

enum class DetectorKind { HiHTP, HiIHT, CorrelatorSignature, CorrelatorIdeal };

std::string to_string(DetectorKind kind);
DetectorKind detector_from_string(const std::string& name);

struct TrialConfig {
  ChannelPrior prior;
  DetectorKind detector = DetectorKind::HiIHT;
  DetectorConfig detector_cfg;
  NoiseModel noise_model = NoiseModel::MeasurementDomain;
  double snr_db = 10.0;
  bool random_phases = true;
  /// Explicit energy threshold; when empty, 0 under exact sparsity and 1/SNR
  /// otherwise.
  std::optional<double> xi;

  const ProblemDims& dims() const { return prior.dims; }
  double sigma2() const;
  double effective_xi() const;
  void validate() const;
};

struct TrialRecord {
  std::vector<std::size_t> true_active;
  std::vector<std::size_t> detected_active;
  /// ||sqrt(n) W (h_hat_i - h_i)||^2 per true active user, in true_active
  /// order. Empty for the correlator detectors.
  std::vector<double> mse_per_user;
  std::size_t iterations = 0;
  double residual = 0.0;
  double error_norm = 0.0;  // ||h_hat - h||
  double noise_norm = 0.0;  // ||z|| in the measurement domain
  bool ls_converged = true;
};

/// Random channel with uniformly drawn active blocks and taps, i.i.d.
/// CN(0, sigma_h2) coefficients on the support.
std::pair<HierVector, HierSupport> sample_channel(const ChannelPrior& prior, Rng& rng);

/// Unnormalized frequency-domain error of one block: zero-pads the length-s
/// difference to n and applies sqrt(n) W.
double block_mse(std::span<const cplx> estimate, std::span<const cplx> truth, std::size_t n);

TrialRecord run_trial(const TrialConfig& config, Rng& rng);

struct Estimate {
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval at the given z (default 95%).
Estimate wilson(std::size_t successes, std::size_t total, double z = 1.959963984540054);

struct MetricsSummary {
  TrialConfig config;
  std::size_t trials = 0;
  std::size_t active_events = 0;
  std::size_t misses = 0;
  std::size_t false_alarm_trials = 0;
  std::size_t inactive_events = 0;
  std::size_t false_alarm_users = 0;
  Estimate pmd;
  /// Fraction of trials in which any inactive user is declared active.
  Estimate pfa;
  /// Per-user decision error rate over all (trial, user) pairs.
  Estimate pbe;
  double pfa_per_user = 0.0;
  /// Mean MSE_i over true active users that were detected.
  double mse_mean = 0.0;
  /// Mean MSE_i over all true active users.
  double mse_all_mean = 0.0;
  double mean_iterations = 0.0;
};

/// `trials` independent trials; trial i draws from derive_stream(seed, i) so
/// results do not depend on `workers`.
MetricsSummary monte_carlo(const TrialConfig& config, std::size_t trials, std::uint64_t seed, std::size_t workers = 1);

/// Empirical quantile of ||h_hat - h|| / ||z|| over `trials` trials.
double calibrate_tau(const TrialConfig& config, std::size_t trials, std::uint64_t seed, double quantile = 0.99,
                     std::size_t workers = 1);

struct SweepGrid {
  std::vector<double> snr_db;
  std::vector<std::size_t> m, u, s, k_u, k_s;
  /// Walk the lists in lockstep (length-1 lists broadcast) instead of taking
  /// the Cartesian product.
  bool zipped = false;

  bool empty() const;
};

struct BoundSettings {
  std::vector<std::string> overlays;  // any of "thm2", "thm4", "correlator"
  std::optional<double> tau;
  std::size_t tau_calibration_trials = 1000;
  double epsilon = 0.05;
  double rip_C = 1.0;
  double rip_c = 0.05;
  double srip_c = 1.0;
};

struct SweepCell {
  TrialConfig config;
  MetricsSummary summary;
  std::vector<std::pair<std::string, double>> bounds;
  double tau = 0.0;
  double runtime_s = 0.0;
};

/// Expands the grid over `base`. A block length of 0 (in `base` and with no
/// `s` list) is resolved per cell as n / u.
std::vector<TrialConfig> expand_grid(const SweepGrid& grid, const TrialConfig& base);

/// One monte_carlo per cell with seed mix_seed(seed, cell_index), plus any
/// requested bound overlays.
std::vector<SweepCell> sweep(const SweepGrid& grid, const TrialConfig& base, std::size_t trials, std::uint64_t seed,
                             std::size_t workers = 1, const BoundSettings& bounds = {});

/// Bound overlay values for one configuration at noise enhancement `tau`.
std::vector<std::pair<std::string, double>> bound_overlays(const TrialConfig& config, double tau,
                                                           const BoundSettings& settings);

struct SlopeFit {
  double slope = 0.0;
  double stderr_ = 0.0;
  std::size_t points = 0;
};

/// Least-squares slope of log10(pmd) against log10(snr) over the points with
/// pmd inside [lo, hi]. Throws std::invalid_argument with fewer than three.
SlopeFit diversity_slope(const std::vector<double>& snr_linear, const std::vector<double>& pmd, double lo = 1e-4,
                         double hi = 1e-1);
SlopeFit diversity_slope(const std::vector<MetricsSummary>& summaries, double lo = 1e-4, double hi = 1e-1);

}  // namespace hierdetect::sim
