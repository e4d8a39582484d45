#include <gtest/gtest.h>

#include "../oracles.hpp"
#include "hierdetect/detect.hpp"
#include "hierdetect/sim.hpp"

using namespace hierdetect;

namespace {

struct Instance {
  SignatureSet sig;
  FourierMeasurement a;
};

Instance make_instance(std::size_t n, std::size_t m, std::uint64_t seed, bool phases = true, std::size_t stride = 1) {
  Rng rng(seed);
  auto window = make_control_window(n, m, rng);
  auto sig = make_signature(window, n, stride, rng, phases);
  auto a = measurement_from_signature(sig);
  return {std::move(sig), std::move(a)};
}

double dist(const HierVector& a, const HierVector& b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += std::norm(a.data()[k] - b.data()[k]);
  return std::sqrt(acc);
}

std::pair<HierVector, HierSupport> channel(const ProblemDims& d, Rng& rng) {
  return sim::sample_channel(sim::ChannelPrior{d, 1.0, true}, rng);
}

}  // namespace

TEST(DetectorConfig, Validation) {
  DetectorConfig c;
  EXPECT_NO_THROW(c.validate());
  c.max_iters = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.ls_tolerance = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.xi = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(RestrictedLeastSquares, NoiselessRecoveryOnTrueSupport) {
  const ProblemDims d{128, 8, 16, 2, 3, 40};
  const auto inst = make_instance(128, 40, 1);
  Rng rng(2);
  auto [h, support] = channel(d, rng);
  const auto y = apply_measurement(inst.a, embed(h, d.n));
  const auto res = restricted_least_squares(inst.a, y, support, d, {});
  EXPECT_TRUE(res.converged);
  EXPECT_LE(dist(res.h, h), 1e-8 * std::sqrt(h.norm_squared()));
  EXPECT_LT(res.residual, 1e-8);
}

TEST(RestrictedLeastSquares, EmptySupport) {
  const ProblemDims d{32, 4, 8, 1, 1, 8};
  const auto inst = make_instance(32, 8, 3);
  cvec y{1, 2, 3, 4, 5, 6, 7, 8};
  const auto res = restricted_least_squares(inst.a, y, HierSupport{}, d, {});
  EXPECT_EQ(res.h, HierVector(4, 8));
  EXPECT_NEAR(res.residual, std::sqrt(204.0), 1e-12);
}

TEST(RestrictedLeastSquares, MatchesDensePseudoInverse) {
  const ProblemDims d{32, 4, 8, 2, 2, 16};
  Rng rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    const auto inst = make_instance(32, 16, 100 + rep);
    HierSupport s;
    while (s.total_size() < 4) {
      const auto b = std::uniform_int_distribution<std::size_t>(0, 3)(rng);
      const auto j = std::uniform_int_distribution<std::size_t>(0, 7)(rng);
      s.insert(b, j);
    }
    cvec y(16);
    for (auto& v : y) v = complex_gaussian(rng, 1.0);

    const auto dense = oracle::measurement_matrix(32, inst.a.row_set(), inst.a.phases());
    std::vector<std::size_t> cols;
    for (std::size_t k = 0; k < s.blocks.size(); ++k)
      for (auto j : s.offsets[k]) cols.push_back(s.blocks[k] * 8 + j);
    oracle::Mat as(16, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) as.col(static_cast<Eigen::Index>(c)) = dense.col(static_cast<Eigen::Index>(cols[c]));
    const oracle::Vec z = as.completeOrthogonalDecomposition().pseudoInverse() * oracle::to_eigen(y);

    const auto res = restricted_least_squares(inst.a, y, s, d, {});
    for (std::size_t c = 0; c < cols.size(); ++c)
      EXPECT_NEAR(std::abs(res.h.data()[cols[c]] - z(static_cast<Eigen::Index>(c))), 0.0, 1e-7);
  }
}

TEST(RestrictedLeastSquares, RejectsUnderdeterminedSupport) {
  const ProblemDims d{32, 4, 8, 4, 8, 4};
  const auto inst = make_instance(32, 4, 5);
  HierSupport s;
  for (std::size_t j = 0; j < 5; ++j) s.insert(0, j);
  EXPECT_THROW(restricted_least_squares(inst.a, cvec(4), s, d, {}), underdetermined_support);
}

TEST(HierPursuit, UnitaryOperatorRecoversInOneIteration) {
  const ProblemDims d{64, 4, 16, 2, 3, 64};
  const auto inst = make_instance(64, 64, 6, false);
  Rng rng(7);
  auto [h, support] = channel(d, rng);
  const auto y = apply_measurement(inst.a, embed(h, d.n));
  double min_energy = 1e300;
  for (auto b : support.blocks) min_energy = std::min(min_energy, block_energies(h, d)[b]);

  DetectorConfig cfg;
  cfg.max_iters = 1;
  for (double xi : {0.0, 0.5 * min_energy}) {
    cfg.xi = xi;
    for (auto* algo : {&hihtp, &hiiht}) {
      const auto out = algo(inst.a, y, d, cfg);
      EXPECT_EQ(out.iterations, 1u);
      EXPECT_LT(dist(out.h_hat, h), 1e-12);
      EXPECT_EQ(out.active_users, support.blocks);
    }
  }
}

TEST(HierPursuit, ZeroInputGivesZeroOutput) {
  const ProblemDims d{64, 4, 16, 2, 3, 20};
  const auto inst = make_instance(64, 20, 8);
  DetectorConfig cfg;
  cfg.xi = 0.1;
  for (auto* algo : {&hihtp, &hiiht}) {
    const auto out = algo(inst.a, cvec(20), d, cfg);
    EXPECT_EQ(out.h_hat, HierVector(4, 16));
    EXPECT_TRUE(out.active_users.empty());
    EXPECT_TRUE(out.support_history.back().is_hier_sparse(2, 3, 4, 16));
  }
}

TEST(HierPursuit, InputValidation) {
  const ProblemDims d{64, 4, 16, 2, 3, 20};
  const auto inst = make_instance(64, 20, 9);
  EXPECT_THROW(hihtp(inst.a, cvec(19), d, {}), dimension_error);
  ProblemDims wrong = d;
  wrong.m = 21;
  EXPECT_THROW(hiiht(inst.a, cvec(21), wrong, {}), dimension_error);
}

TEST(HierPursuit, NoiselessRecoveryRegionAndAgreement) {
  const ProblemDims d{256, 16, 16, 2, 2, 128};
  int exact_htp = 0, exact_iht = 0, agree = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    Rng rng = derive_stream(77, static_cast<std::uint64_t>(t));
    const auto window = make_control_window(d.n, d.m, rng);
    const auto sig = make_signature(window, d.n, d.s, rng);
    const auto a = measurement_from_signature(sig);
    auto [h, support] = channel(d, rng);
    const auto y = apply_measurement(a, embed(h, d.n));
    const auto o1 = hihtp(a, y, d, {});
    const auto o2 = hiiht(a, y, d, {});
    const double tol = 1e-8 * std::sqrt(h.norm_squared());
    if (o1.support_history.back() == support && dist(o1.h_hat, h) <= tol) ++exact_htp;
    if (o2.support_history.back() == support && dist(o2.h_hat, h) <= tol) ++exact_iht;
    if (o1.support_history.back() == o2.support_history.back()) ++agree;
  }
  EXPECT_GE(exact_htp, 198);
  EXPECT_GE(exact_iht, 198);
  EXPECT_GE(agree, 190);
}

TEST(HierPursuit, StopRules) {
  const ProblemDims d{128, 8, 16, 2, 2, 64};
  const auto inst = make_instance(128, 64, 10);
  Rng rng(11);
  auto [h, support] = channel(d, rng);
  const auto y = apply_measurement(inst.a, embed(h, d.n));
  DetectorConfig cfg;
  cfg.stop_rule = StopRule::MaxIters;
  cfg.max_iters = 7;
  EXPECT_EQ(hiiht(inst.a, y, d, cfg).iterations, 7u);
  cfg.stop_rule = StopRule::ResidualTolerance;
  cfg.max_iters = 50;
  cfg.residual_tolerance = 1e-6;
  const auto out = hihtp(inst.a, y, d, cfg);
  EXPECT_LT(out.iterations, 50u);
  EXPECT_LE(out.residual_history.back(), 1e-6 * std::sqrt(static_cast<double>(y.size())) * 10.0);
}

TEST(DetectUsers, KeepsSupportBlocksAboveThreshold) {
  const ProblemDims d{16, 4, 4, 2, 1, 4};
  HierVector h(4, 4);
  h(1, 0) = 2.0;
  h(3, 1) = 0.5;
  HierSupport s;
  s.insert(1, 0);
  s.insert(3, 1);
  EXPECT_EQ(detect_users(h, s, 0.0, d), (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(detect_users(h, s, 1.0, d), (std::vector<std::size_t>{1}));
  EXPECT_EQ(detect_users(h, s, 1.0, d), block_threshold(h, 1.0, d));
}

TEST(SelectUsers, ThresholdAndRankModes) {
  std::vector<double> stats{1.0, 5.0, 5.0, 0.2};
  EXPECT_EQ(select_users(stats, 1.0, 2), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(select_users(stats, 0.0, 1), (std::vector<std::size_t>{1}));
  EXPECT_EQ(select_users(stats, 0.0, 2), (std::vector<std::size_t>{1, 2}));
  EXPECT_THROW(select_users(stats, -1.0, 2), std::invalid_argument);
}

TEST(BlockCorrelator, SingleUserWithOrthogonalShifts) {
  const ProblemDims d{64, 4, 16, 1, 3, 64};
  const auto inst = make_instance(64, 64, 12, true, 16);
  HierVector h(4, 16);
  h(2, 0) = cplx(0.6, -0.3);
  h(2, 5) = cplx(-0.2, 0.4);
  const double energy = h.norm_squared();
  const auto y = apply_signature_matrix(inst.sig, embed(h, 64));
  for (double xi : {1e-6, 0.5 * 64.0 * 64.0 * energy, 0.999 * 64.0 * 64.0 * energy})
    EXPECT_EQ(block_correlator(y, inst.sig, d, xi), (std::vector<std::size_t>{2}));
  EXPECT_TRUE(block_correlator(cvec(64), inst.sig, d, 0.1).empty());
}

TEST(BlockCorrelator, MatchesDenseCorrelation) {
  const ProblemDims d{64, 4, 16, 2, 2, 24};
  const auto inst = make_instance(64, 24, 13, true, 16);
  HierVector h(4, 16);
  h(0, 3) = cplx(1.0, 0.5);
  h(3, 7) = cplx(-0.4, 0.9);
  const auto x = embed(h, 64);
  const oracle::Mat dp = oracle::circulant(inst.sig.p0);
  const oracle::Vec y = dp * oracle::to_eigen(x);
  const oracle::Vec corr = dp.adjoint() * y;
  const auto fast = correlate_all_shifts(oracle::from_eigen(y), inst.sig, d);
  std::vector<double> stats(4, 0.0);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 16; ++j) {
      EXPECT_NEAR(std::abs(fast(i, j) - corr(static_cast<Eigen::Index>(i * 16 + j))), 0.0, 1e-9);
      stats[i] += std::norm(corr(static_cast<Eigen::Index>(i * 16 + j)));
    }
  const double xi = 0.5 * std::min(stats[0], stats[3]);
  std::vector<std::size_t> expect;
  for (std::size_t i = 0; i < 4; ++i)
    if (stats[i] >= xi) expect.push_back(i);
  EXPECT_EQ(block_correlator(oracle::from_eigen(y), inst.sig, d, xi), expect);
}

TEST(IdealOrthogonal, NoiselessStatisticsAreScaledEnergies) {
  const ProblemDims d{64, 4, 16, 1, 2, 64};
  Rng rng(14);
  auto [h, support] = channel(d, rng);
  const auto stats = ideal_orthogonal_statistics(h, 1e-30, d, rng);
  const auto e = block_energies(h, d);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(stats[i], 64.0 * 64.0 * e[i], 1e-9 * (1.0 + 4096.0 * e[i]));
}
