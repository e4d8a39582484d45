#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "../oracles.hpp"
#include "hierdetect/bounds.hpp"
#include "hierdetect/rng.hpp"
#include "hierdetect/sim.hpp"

using namespace hierdetect;
using namespace hierdetect::sim;

namespace {

TrialConfig small_config(DetectorKind kind = DetectorKind::HiIHT, double snr_db = 10.0) {
  TrialConfig c;
  c.prior.dims = {64, 4, 16, 2, 2, 32};
  c.detector = kind;
  c.snr_db = snr_db;
  return c;
}

bool same_record(const TrialRecord& a, const TrialRecord& b) {
  return a.true_active == b.true_active && a.detected_active == b.detected_active &&
         a.mse_per_user == b.mse_per_user && a.iterations == b.iterations && a.residual == b.residual &&
         a.error_norm == b.error_norm && a.noise_norm == b.noise_norm;
}

void expect_same_summary(const MetricsSummary& a, const MetricsSummary& b) {
  EXPECT_EQ(a.misses, b.misses);
  EXPECT_EQ(a.active_events, b.active_events);
  EXPECT_EQ(a.false_alarm_trials, b.false_alarm_trials);
  EXPECT_EQ(a.false_alarm_users, b.false_alarm_users);
  EXPECT_EQ(a.pmd.value, b.pmd.value);
  EXPECT_EQ(a.pmd.lo, b.pmd.lo);
  EXPECT_EQ(a.pmd.hi, b.pmd.hi);
  EXPECT_TRUE(a.mse_mean == b.mse_mean || (std::isnan(a.mse_mean) && std::isnan(b.mse_mean)));
  EXPECT_EQ(a.mean_iterations, b.mean_iterations);
}

}  // namespace

TEST(SampleChannel, FullSparsityGivesDenseVector) {
  Rng rng(1);
  ChannelPrior prior{{24, 4, 6, 4, 6, 24}};
  const auto [h, support] = sample_channel(prior, rng);
  EXPECT_EQ(support.total_size(), 24u);
  for (const auto& v : h.data()) EXPECT_NE(v, cplx{});
}

TEST(SampleChannel, ActivationFrequencyAndEnergy) {
  Rng rng(2);
  ChannelPrior prior{{32, 8, 4, 3, 2, 8}};
  const std::size_t draws = 100000;
  std::vector<std::size_t> count(8, 0);
  double energy = 0.0;
  for (std::size_t t = 0; t < draws; ++t) {
    const auto [h, support] = sample_channel(prior, rng);
    ASSERT_TRUE(support.is_hier_sparse(3, 2, 8, 4));
    ASSERT_EQ(support.blocks.size(), 3u);
    for (std::size_t k = 0; k < support.blocks.size(); ++k) {
      ++count[support.blocks[k]];
      ASSERT_EQ(support.offsets[k].size(), 2u);
    }
    energy += h.norm_squared();
  }
  for (auto c : count) EXPECT_NEAR(static_cast<double>(c) / draws, 3.0 / 8.0, 0.02);
  EXPECT_NEAR(energy / draws, 6.0, 0.06);
}

TEST(SampleChannel, RelaxedSparsityStaysWithinLimits) {
  Rng rng(3);
  ChannelPrior prior{{64, 4, 16, 3, 4, 8}, 2.0, false};
  std::vector<std::size_t> seen(4, 0);
  for (int t = 0; t < 2000; ++t) {
    const auto [h, support] = sample_channel(prior, rng);
    ASSERT_TRUE(support.is_hier_sparse(3, 4, 4, 16));
    ASSERT_GE(support.blocks.size(), 1u);
    ++seen[support.blocks.size()];
  }
  EXPECT_GT(seen[1], 0u);
  EXPECT_GT(seen[3], 0u);
}

TEST(BlockMse, MatchesDirectDft) {
  Rng rng(4);
  const std::size_t n = 32, s = 8;
  cvec est(s), truth(s);
  for (std::size_t j = 0; j < s; ++j) {
    est[j] = complex_gaussian(rng, 1.0);
    truth[j] = complex_gaussian(rng, 1.0);
  }
  cvec diff(n);
  for (std::size_t j = 0; j < s; ++j) diff[j] = est[j] - truth[j];
  const oracle::Vec spec = oracle::dft_matrix(n) * oracle::to_eigen(diff);
  EXPECT_NEAR(block_mse(est, truth, n), static_cast<double>(n) * spec.squaredNorm(), 1e-10);
  EXPECT_EQ(block_mse(truth, truth, n), 0.0);
  EXPECT_THROW(block_mse(est, cvec(s + 1), n), dimension_error);
}

TEST(BlockMse, GlobalPhaseInvariance) {
  Rng rng(5);
  cvec est(8), truth(8), est_r(8), truth_r(8);
  const cplx phase = std::polar(1.0, 0.7);
  for (std::size_t j = 0; j < 8; ++j) {
    est[j] = complex_gaussian(rng, 1.0);
    truth[j] = complex_gaussian(rng, 1.0);
    est_r[j] = phase * est[j];
    truth_r[j] = phase * truth[j];
  }
  EXPECT_NEAR(block_mse(est, truth, 64), block_mse(est_r, truth_r, 64), 1e-10);
}

TEST(BlockMse, ZeroEstimatorFollowsParseval) {
  Rng rng(6);
  ChannelPrior prior{{64, 4, 16, 1, 3, 8}};
  const cvec zero(16);
  double acc = 0.0;
  const int draws = 100000;
  for (int t = 0; t < draws; ++t) {
    const auto [h, support] = sample_channel(prior, rng);
    acc += block_mse(zero, h.block(support.blocks[0]), 64);
  }
  EXPECT_NEAR(acc / draws / (64.0 * 3.0), 1.0, 0.02);
}

TEST(RunTrial, NearNoiselessUnitaryCase) {
  for (auto kind : {DetectorKind::HiIHT, DetectorKind::HiHTP}) {
    auto c = small_config(kind, 120.0);
    c.prior.dims.m = 64;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      const auto rec = run_trial(c, rng);
      EXPECT_EQ(rec.detected_active, rec.true_active);
      ASSERT_EQ(rec.mse_per_user.size(), 2u);
      for (double v : rec.mse_per_user) EXPECT_LE(v, 1e-8);
    }
  }
}

TEST(RunTrial, DeterministicReplay) {
  for (auto kind : {DetectorKind::HiIHT, DetectorKind::HiHTP, DetectorKind::CorrelatorSignature,
                    DetectorKind::CorrelatorIdeal}) {
    auto c = small_config(kind, 0.0);
    Rng a(77), b(77);
    EXPECT_TRUE(same_record(run_trial(c, a), run_trial(c, b))) << to_string(kind);
  }
  auto c = small_config();
  c.noise_model = NoiseModel::SignalDomain;
  Rng a(78), b(78);
  EXPECT_TRUE(same_record(run_trial(c, a), run_trial(c, b)));
}

TEST(RunTrial, CorrelatorsRecordNoMse) {
  Rng rng(8);
  EXPECT_TRUE(run_trial(small_config(DetectorKind::CorrelatorIdeal), rng).mse_per_user.empty());
  EXPECT_TRUE(run_trial(small_config(DetectorKind::CorrelatorSignature), rng).mse_per_user.empty());
}

TEST(DetectorNames, RoundTrip) {
  for (auto kind : {DetectorKind::HiIHT, DetectorKind::HiHTP, DetectorKind::CorrelatorSignature,
                    DetectorKind::CorrelatorIdeal})
    EXPECT_EQ(detector_from_string(to_string(kind)), kind);
  EXPECT_THROW(detector_from_string("omp"), std::invalid_argument);
}

TEST(TrialConfig, ThresholdPolicy) {
  auto c = small_config(DetectorKind::HiIHT, 20.0);
  EXPECT_NEAR(c.sigma2(), 0.01, 1e-15);
  EXPECT_EQ(c.effective_xi(), 0.0);
  c.prior.exact_sparsity = false;
  EXPECT_NEAR(c.effective_xi(), 0.01, 1e-15);
  c.xi = 0.3;
  EXPECT_EQ(c.effective_xi(), 0.3);
}

TEST(MonteCarlo, ZeroNoiseEasyRegime) {
  auto c = small_config(DetectorKind::HiIHT, 150.0);
  c.prior.dims.m = 64;
  const auto s = monte_carlo(c, 50, 9);
  EXPECT_EQ(s.misses, 0u);
  EXPECT_EQ(s.false_alarm_trials, 0u);
  EXPECT_EQ(s.pmd.value, 0.0);
  EXPECT_EQ(s.pfa.value, 0.0);
  EXPECT_EQ(s.active_events, 100u);
  EXPECT_EQ(s.inactive_events, 100u);
}

TEST(MonteCarlo, WorkerCountDoesNotChangeResults) {
  for (auto kind : {DetectorKind::HiIHT, DetectorKind::CorrelatorSignature}) {
    const auto c = small_config(kind, 0.0);
    const auto serial = monte_carlo(c, 60, 10, 1);
    expect_same_summary(serial, monte_carlo(c, 60, 10, 3));
    expect_same_summary(serial, monte_carlo(c, 60, 10, 8));
  }
}

TEST(MonteCarlo, EstimatesAreProbabilitiesInsideIntervals) {
  const auto s = monte_carlo(small_config(DetectorKind::HiIHT, -5.0), 200, 11);
  for (const auto& e : {s.pmd, s.pfa, s.pbe}) {
    EXPECT_GE(e.value, 0.0);
    EXPECT_LE(e.value, 1.0);
    EXPECT_LE(e.lo, e.value);
    EXPECT_GE(e.hi, e.value);
  }
  EXPECT_GT(s.misses, 0u);
  EXPECT_EQ(s.pmd.value, static_cast<double>(s.misses) / static_cast<double>(s.active_events));
  EXPECT_EQ(s.pbe.value, static_cast<double>(s.misses + s.false_alarm_users) / (200.0 * 4.0));
}

TEST(MonteCarlo, RejectsZeroTrials) { EXPECT_THROW(monte_carlo(small_config(), 0, 1), std::invalid_argument); }

TEST(Wilson, KnownValueAndEdges) {
  const auto e = wilson(5, 10);
  EXPECT_NEAR(e.lo, 0.236593, 1e-6);
  EXPECT_NEAR(e.hi, 0.763407, 1e-6);
  EXPECT_EQ(wilson(0, 20).lo, 0.0);
  EXPECT_EQ(wilson(20, 20).hi, 1.0);
  const auto none = wilson(0, 0);
  EXPECT_EQ(none.lo, 0.0);
  EXPECT_EQ(none.hi, 1.0);
}

TEST(Wilson, WidthShrinksWithSquareRoot) {
  const auto a = wilson(100, 400), b = wilson(400, 1600);
  EXPECT_NEAR((a.hi - a.lo) / (b.hi - b.lo), 2.0, 0.05);
}

TEST(Sweep, SingleCellEqualsMonteCarlo) {
  SweepGrid grid;
  grid.snr_db = {0.0};
  const auto base = small_config();
  const auto cells = sweep(grid, base, 40, 12);
  ASSERT_EQ(cells.size(), 1u);
  auto cell = base;
  cell.snr_db = 0.0;
  expect_same_summary(cells[0].summary, monte_carlo(cell, 40, mix_seed(12, 0)));
}

TEST(Sweep, MissRateNonIncreasingInSnr) {
  SweepGrid grid;
  grid.snr_db = {-10.0, -5.0, 0.0, 5.0};
  TrialConfig base;
  base.prior.dims = {256, 4, 64, 1, 3, 64};
  const auto cells = sweep(grid, base, 300, 13);
  for (std::size_t i = 1; i < cells.size(); ++i)
    EXPECT_LE(cells[i].summary.pmd.lo, cells[i - 1].summary.pmd.hi) << i;
  EXPECT_LT(cells.back().summary.pmd.value, cells.front().summary.pmd.value);
}

TEST(Sweep, OverlaysUseGivenTau) {
  SweepGrid grid;
  grid.snr_db = {5.0};
  BoundSettings bs;
  bs.overlays = {"thm2", "thm4", "correlator"};
  bs.tau = 1.5;
  const auto cells = sweep(grid, small_config(), 5, 14, 1, bs);
  ASSERT_EQ(cells[0].bounds.size(), 3u);
  EXPECT_EQ(cells[0].bounds[0].first, "bound_thm2");
  bounds::BoundParams p;
  p.dims = small_config().dims();
  p.snr = std::pow(10.0, 0.5);
  p.tau = 1.5;
  EXPECT_EQ(cells[0].bounds[0].second, bounds::pmd_bound_thm2(p).clipped);
  EXPECT_EQ(cells[0].bounds[1].second, bounds::pmd_bound_thm4(p).clipped);
  EXPECT_NEAR(cells[0].bounds[2].second, std::min(1.0, std::exp(bounds::correlator_pmd_bound(16, 4, 2, 64, p.snr))),
              1e-15);
  EXPECT_EQ(cells[0].tau, 1.5);
}

TEST(ExpandGrid, CartesianOrderAndDerivedBlockLength) {
  SweepGrid grid;
  grid.u = {4, 8};
  grid.snr_db = {0.0, 5.0, 10.0};
  auto base = small_config();
  base.prior.dims.s = 0;
  const auto cells = expand_grid(grid, base);
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(cells[0].dims().u, 4u);
  EXPECT_EQ(cells[0].dims().s, 16u);
  EXPECT_EQ(cells[2].snr_db, 10.0);
  EXPECT_EQ(cells[3].dims().u, 8u);
  EXPECT_EQ(cells[3].dims().s, 8u);
  EXPECT_EQ(cells[4].snr_db, 5.0);
}

TEST(ExpandGrid, ZippedBroadcastsSingletons) {
  SweepGrid grid;
  grid.zipped = true;
  grid.m = {16, 32, 48};
  grid.snr_db = {-3.0, 0.0, 3.0};
  grid.k_u = {1};
  const auto cells = expand_grid(grid, small_config());
  ASSERT_EQ(cells.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(cells[i].dims().m, 16u * (i + 1));
    EXPECT_EQ(cells[i].snr_db, -3.0 + 3.0 * static_cast<double>(i));
    EXPECT_EQ(cells[i].dims().k_u, 1u);
  }
  grid.u = {2, 4};
  EXPECT_THROW(expand_grid(grid, small_config()), std::invalid_argument);
}

TEST(ExpandGrid, EmptyAndInvalidGrids) {
  EXPECT_THROW(expand_grid(SweepGrid{}, small_config()), std::invalid_argument);
  SweepGrid grid;
  grid.m = {65};
  EXPECT_THROW(expand_grid(grid, small_config()), dimension_error);
}

TEST(DiversitySlope, ExactPowerLaw) {
  std::vector<double> snr, pmd;
  for (double db = 0.0; db <= 30.0; db += 2.0) {
    snr.push_back(std::pow(10.0, db / 10.0));
    pmd.push_back(std::pow(snr.back(), -3.0));
  }
  const auto fit = diversity_slope(snr, pmd);
  EXPECT_NEAR(fit.slope, -3.0, 1e-9);
  EXPECT_EQ(fit.points, 5u);
  EXPECT_NEAR(fit.stderr_, 0.0, 1e-9);
}

TEST(DiversitySlope, NoisyPowerLaw) {
  Rng rng(15);
  std::normal_distribution<double> noise(0.0, 0.05);
  for (int k_s : {3, 6}) {
    std::vector<double> snr, pmd;
    for (double db = 0.0; db <= 40.0; db += 1.0) {
      snr.push_back(std::pow(10.0, db / 10.0));
      pmd.push_back(0.5 * std::pow(snr.back(), -k_s) * (1.0 + noise(rng)));
    }
    EXPECT_NEAR(diversity_slope(snr, pmd).slope, -k_s, 0.1);
  }
}

TEST(DiversitySlope, TooFewPointsThrows) {
  EXPECT_THROW(diversity_slope({1.0, 10.0, 100.0}, {0.5, 0.05, 0.00001}), std::invalid_argument);
  EXPECT_THROW(diversity_slope({1.0}, {0.5, 0.1}), std::invalid_argument);
}

TEST(CalibrateTau, QuantilesAreOrderedAndPositive) {
  const auto c = small_config(DetectorKind::HiIHT, 10.0);
  const double med = calibrate_tau(c, 200, 16, 0.5);
  const double q99 = calibrate_tau(c, 200, 16, 0.99);
  EXPECT_GT(med, 0.0);
  EXPECT_LE(med, q99);
  EXPECT_TRUE(std::isfinite(q99));
  EXPECT_EQ(q99, calibrate_tau(c, 200, 16, 0.99, 4));
  EXPECT_THROW(calibrate_tau(small_config(DetectorKind::CorrelatorIdeal), 10, 1), std::invalid_argument);
}

TEST(IdealCorrelator, EmpiricalSlopeMatchesBound) {
  // u = 2, s = 4, k_s = 1: P_md ~ B0 / (1 + n snr)
  TrialConfig c;
  c.prior.dims = {8, 2, 4, 1, 1, 8};
  c.detector = DetectorKind::CorrelatorIdeal;
  std::vector<double> x, y;
  for (double nsnr : {10.0, 30.0, 100.0, 300.0}) {
    c.snr_db = 10.0 * std::log10(nsnr / 8.0);
    const auto s = monte_carlo(c, 400000, 17);
    ASSERT_GT(s.misses, 50u);
    x.push_back(std::log1p(nsnr));
    y.push_back(std::log(s.pmd.value));
  }
  const double mx = (x[0] + x[1] + x[2] + x[3]) / 4.0, my = (y[0] + y[1] + y[2] + y[3]) / 4.0;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  EXPECT_NEAR(sxy / sxx, -1.0, 0.15);
}
