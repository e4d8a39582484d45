#include "hierdetect/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>

namespace hierdetect::sim {

std::string to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::HiHTP: return "hihtp";
    case DetectorKind::HiIHT: return "hiiht";
    case DetectorKind::CorrelatorSignature: return "correlator_signature";
    case DetectorKind::CorrelatorIdeal: return "correlator_ideal";
  }
  return "unknown";
}

DetectorKind detector_from_string(const std::string& name) {
  if (name == "hihtp") return DetectorKind::HiHTP;
  if (name == "hiiht") return DetectorKind::HiIHT;
  if (name == "correlator_signature") return DetectorKind::CorrelatorSignature;
  if (name == "correlator_ideal") return DetectorKind::CorrelatorIdeal;
  throw std::invalid_argument("unknown detector '" + name + "'");
}

double TrialConfig::sigma2() const { return std::pow(10.0, -snr_db / 10.0); }

double TrialConfig::effective_xi() const {
  if (xi) return *xi;
  return prior.exact_sparsity ? 0.0 : sigma2();
}

void TrialConfig::validate() const {
  prior.dims.validate();
  if (!(prior.sigma_h2 > 0.0)) throw std::invalid_argument("channel prior: sigma_h2 must be positive");
  if (!std::isfinite(snr_db)) throw std::invalid_argument("snr_db must be finite");
  if (xi && !(*xi >= 0.0)) throw std::invalid_argument("xi must be non-negative");
  detector_cfg.validate();
}

namespace {

std::vector<std::size_t> choose(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

std::pair<HierVector, HierSupport> sample_channel(const ChannelPrior& prior, Rng& rng) {
  const auto& d = prior.dims;
  d.validate();
  std::size_t active = d.k_u;
  if (!prior.exact_sparsity) active = std::uniform_int_distribution<std::size_t>(1, d.k_u)(rng);

  HierVector h(d.u, d.s);
  HierSupport support;
  for (auto b : choose(d.u, active, rng)) {
    std::size_t taps = d.k_s;
    if (!prior.exact_sparsity) taps = std::uniform_int_distribution<std::size_t>(1, d.k_s)(rng);
    for (auto j : choose(d.s, taps, rng)) {
      support.insert(b, j);
      h(b, j) = complex_gaussian(rng, prior.sigma_h2);
    }
  }
  return {std::move(h), std::move(support)};
}

double block_mse(std::span<const cplx> estimate, std::span<const cplx> truth, std::size_t n) {
  if (estimate.size() != truth.size() || estimate.size() > n) throw dimension_error("block_mse: length mismatch");
  cvec diff(n);
  for (std::size_t j = 0; j < estimate.size(); ++j) diff[j] = estimate[j] - truth[j];
  const auto spec = unitary_dft(diff);
  double acc = 0.0;
  for (const auto& v : spec) acc += std::norm(v);
  return static_cast<double>(n) * acc;
}

TrialRecord run_trial(const TrialConfig& config, Rng& rng) {
  const auto& d = config.dims();
  const double sigma2 = config.sigma2();
  const double xi = config.effective_xi();
  TrialRecord rec;

  if (config.detector == DetectorKind::CorrelatorIdeal) {
    auto [h, support] = sample_channel(config.prior, rng);
    rec.true_active = support.blocks;
    const auto stats = ideal_orthogonal_statistics(h, sigma2, d, rng);
    rec.detected_active = select_users(stats, xi, d.k_u);
    return rec;
  }

  const auto window = make_control_window(d.n, d.m, rng);
  const auto sig = make_signature(window, d.n, d.s, rng, config.random_phases);
  auto [h, support] = sample_channel(config.prior, rng);
  rec.true_active = support.blocks;
  const cvec x = embed(h, d.n);

  if (config.detector == DetectorKind::CorrelatorSignature) {
    cvec y = apply_signature_matrix(sig, x);
    for (auto& v : y) v += complex_gaussian(rng, sigma2);
    rec.detected_active = block_correlator(y, sig, d, xi);
    return rec;
  }

  const auto a = measurement_from_signature(sig);
  cvec y;
  cvec z;
  const NoiseSpec noise{sigma2, config.noise_model};
  if (config.noise_model == NoiseModel::MeasurementDomain) {
    y = apply_measurement(a, x);
    z = sample_noise(noise, d, rng);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] += z[k];
  } else {
    const cvec zp = sample_noise(noise, d, rng);
    cvec xz = x;
    for (std::size_t k = 0; k < xz.size(); ++k) xz[k] += zp[k];
    y = apply_measurement(a, xz);
    z = apply_measurement(a, zp);
  }

  DetectorConfig cfg = config.detector_cfg;
  cfg.xi = xi;
  const auto outcome = config.detector == DetectorKind::HiHTP ? hihtp(a, y, d, cfg) : hiiht(a, y, d, cfg);

  rec.detected_active = outcome.active_users;
  rec.iterations = outcome.iterations;
  rec.residual = outcome.residual_history.empty() ? 0.0 : outcome.residual_history.back();
  rec.ls_converged = outcome.ls_converged;
  double err = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) err += std::norm(outcome.h_hat.data()[k] - h.data()[k]);
  rec.error_norm = std::sqrt(err);
  double zz = 0.0;
  for (const auto& v : z) zz += std::norm(v);
  rec.noise_norm = std::sqrt(zz);
  for (auto b : rec.true_active) rec.mse_per_user.push_back(block_mse(outcome.h_hat.block(b), h.block(b), d.n));
  return rec;
}

Estimate wilson(std::size_t successes, std::size_t total, double z) {
  if (total == 0) return {0.0, 0.0, 1.0};
  const double nn = static_cast<double>(total);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {p, std::max(0.0, std::min(p, centre - half)), std::min(1.0, std::max(p, centre + half))};
}

namespace {

struct Tally {
  std::size_t actives = 0;
  std::size_t misses = 0;
  std::size_t inactive = 0;
  std::size_t false_alarms = 0;
  double mse_detected = 0.0;
  std::size_t mse_detected_count = 0;
  double mse_all = 0.0;
  std::size_t mse_all_count = 0;
  std::size_t iterations = 0;
  double tau_ratio = 0.0;
};

Tally tally(const TrialRecord& rec, std::size_t u) {
  Tally t;
  t.actives = rec.true_active.size();
  t.inactive = u - rec.true_active.size();
  for (std::size_t k = 0; k < rec.true_active.size(); ++k) {
    const bool hit = std::binary_search(rec.detected_active.begin(), rec.detected_active.end(), rec.true_active[k]);
    if (!hit) ++t.misses;
    if (k < rec.mse_per_user.size()) {
      t.mse_all += rec.mse_per_user[k];
      ++t.mse_all_count;
      if (hit) {
        t.mse_detected += rec.mse_per_user[k];
        ++t.mse_detected_count;
      }
    }
  }
  for (auto b : rec.detected_active)
    if (!std::binary_search(rec.true_active.begin(), rec.true_active.end(), b)) ++t.false_alarms;
  t.iterations = rec.iterations;
  t.tau_ratio = rec.noise_norm > 0.0 ? rec.error_norm / rec.noise_norm : 0.0;
  return t;
}

std::vector<Tally> run_all(const TrialConfig& config, std::size_t trials, std::uint64_t seed, std::size_t workers) {
  config.validate();
  std::vector<Tally> out(trials);
  workers = std::max<std::size_t>(1, std::min(workers, trials));
  auto job = [&](std::size_t w) {
    for (std::size_t i = w; i < trials; i += workers) {
      Rng rng = derive_stream(seed, i);
      out[i] = tally(run_trial(config, rng), config.dims().u);
    }
  };
  if (workers == 1) {
    job(0);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          job(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace

MetricsSummary monte_carlo(const TrialConfig& config, std::size_t trials, std::uint64_t seed, std::size_t workers) {
  if (trials < 1) throw std::invalid_argument("monte_carlo: trials must be >= 1");
  const auto tallies = run_all(config, trials, seed, workers);

  MetricsSummary s;
  s.config = config;
  s.trials = trials;
  std::size_t fa_trials = 0, mse_det_n = 0, mse_all_n = 0, iters = 0;
  double mse_det = 0.0, mse_all = 0.0;
  for (const auto& t : tallies) {
    s.active_events += t.actives;
    s.misses += t.misses;
    s.inactive_events += t.inactive;
    s.false_alarm_users += t.false_alarms;
    if (t.false_alarms > 0) ++fa_trials;
    mse_det += t.mse_detected;
    mse_det_n += t.mse_detected_count;
    mse_all += t.mse_all;
    mse_all_n += t.mse_all_count;
    iters += t.iterations;
  }
  s.false_alarm_trials = fa_trials;
  s.pmd = wilson(s.misses, s.active_events);
  s.pfa = wilson(fa_trials, trials);
  s.pbe = wilson(s.misses + s.false_alarm_users, trials * config.dims().u);
  s.pfa_per_user = s.inactive_events ? static_cast<double>(s.false_alarm_users) / static_cast<double>(s.inactive_events) : 0.0;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.mse_mean = mse_det_n ? mse_det / static_cast<double>(mse_det_n) : nan;
  s.mse_all_mean = mse_all_n ? mse_all / static_cast<double>(mse_all_n) : nan;
  s.mean_iterations = static_cast<double>(iters) / static_cast<double>(trials);
  return s;
}

double calibrate_tau(const TrialConfig& config, std::size_t trials, std::uint64_t seed, double quantile,
                     std::size_t workers) {
  if (config.detector != DetectorKind::HiHTP && config.detector != DetectorKind::HiIHT)
    throw std::invalid_argument("calibrate_tau: needs a recovery detector");
  if (trials < 1 || !(quantile > 0.0 && quantile <= 1.0)) throw std::invalid_argument("calibrate_tau: bad arguments");
  const auto tallies = run_all(config, trials, seed, workers);
  std::vector<double> ratios;
  ratios.reserve(trials);
  for (const auto& t : tallies) ratios.push_back(t.tau_ratio);
  std::sort(ratios.begin(), ratios.end());
  const auto idx = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(trials))) - 1;
  return ratios[std::min(idx, trials - 1)];
}

bool SweepGrid::empty() const {
  return snr_db.empty() && m.empty() && u.empty() && s.empty() && k_u.empty() && k_s.empty();
}

std::vector<TrialConfig> expand_grid(const SweepGrid& grid, const TrialConfig& base) {
  if (grid.empty()) throw std::invalid_argument("sweep grid is empty");
  auto or_base = [](const std::vector<std::size_t>& v, std::size_t b) { return v.empty() ? std::vector{b} : v; };
  const auto& bd = base.dims();
  const auto us = or_base(grid.u, bd.u), ss = or_base(grid.s, bd.s), kus = or_base(grid.k_u, bd.k_u),
             kss = or_base(grid.k_s, bd.k_s), ms = or_base(grid.m, bd.m);
  const auto snrs = grid.snr_db.empty() ? std::vector{base.snr_db} : grid.snr_db;

  auto make = [&](std::size_t u, std::size_t s, std::size_t ku, std::size_t ks, std::size_t m, double snr) {
    TrialConfig c = base;
    auto& d = c.prior.dims;
    d.u = u;
    d.s = s == 0 ? (u ? d.n / u : 0) : s;
    d.k_u = ku;
    d.k_s = ks;
    d.m = m;
    c.snr_db = snr;
    return c;
  };

  std::vector<TrialConfig> cells;
  if (grid.zipped) {
    std::size_t len = 1;
    auto merge = [&](std::size_t l) {
      if (l == 1) return;
      if (len != 1 && l != len) throw std::invalid_argument("zipped sweep lists must share one length");
      len = l;
    };
    merge(us.size()), merge(ss.size()), merge(kus.size()), merge(kss.size()), merge(ms.size()), merge(snrs.size());
    auto at = [](const auto& v, std::size_t i) { return v.size() == 1 ? v[0] : v[i]; };
    for (std::size_t i = 0; i < len; ++i)
      cells.push_back(make(at(us, i), at(ss, i), at(kus, i), at(kss, i), at(ms, i), at(snrs, i)));
  } else {
    for (auto u : us)
      for (auto s : ss)
        for (auto ku : kus)
          for (auto ks : kss)
            for (auto m : ms)
              for (auto snr : snrs) cells.push_back(make(u, s, ku, ks, m, snr));
  }
  for (const auto& c : cells) c.validate();
  return cells;
}

std::vector<std::pair<std::string, double>> bound_overlays(const TrialConfig& config, double tau,
                                                           const BoundSettings& settings) {
  std::vector<std::pair<std::string, double>> out;
  bounds::BoundParams p;
  p.dims = config.dims();
  p.snr = 1.0 / config.sigma2();
  p.tau = tau;
  p.xi = config.effective_xi();
  p.epsilon = settings.epsilon;
  p.rip_C = settings.rip_C;
  p.rip_c = settings.rip_c;
  p.srip_c = settings.srip_c;
  p.sigma_h2 = config.prior.sigma_h2;
  for (const auto& name : settings.overlays) {
    double v = std::numeric_limits<double>::quiet_NaN();
    if (name == "thm2") {
      v = bounds::pmd_bound_thm2(p).clipped;
    } else if (name == "thm4") {
      v = bounds::pmd_bound_thm4(p).clipped;
    } else if (name == "correlator") {
      try {
        const auto& d = p.dims;
        v = std::min(1.0, std::exp(bounds::correlator_pmd_bound(d.s, d.u, d.k_s, d.n, p.snr)));
      } catch (const std::exception&) {
        // b0 not evaluable in double precision for this cell
      }
    } else {
      throw std::invalid_argument("unknown bound overlay '" + name + "'");
    }
    out.emplace_back("bound_" + name, v);
  }
  return out;
}

std::vector<SweepCell> sweep(const SweepGrid& grid, const TrialConfig& base, std::size_t trials, std::uint64_t seed,
                             std::size_t workers, const BoundSettings& bounds) {
  const auto configs = expand_grid(grid, base);
  std::vector<SweepCell> cells;
  cells.reserve(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    SweepCell cell;
    cell.config = configs[i];
    const std::uint64_t cell_seed = mix_seed(seed, i);
    cell.summary = monte_carlo(cell.config, trials, cell_seed, workers);
    if (!bounds.overlays.empty()) {
      const bool recovery = cell.config.detector == DetectorKind::HiHTP || cell.config.detector == DetectorKind::HiIHT;
      if (bounds.tau) {
        cell.tau = *bounds.tau;
      } else if (recovery) {
        cell.tau = calibrate_tau(cell.config, bounds.tau_calibration_trials, mix_seed(cell_seed, 0xca1b), 0.99, workers);
      } else {
        cell.tau = 1.0;
      }
      if (cell.tau <= 0.0) cell.tau = std::numeric_limits<double>::min();
      cell.bounds = bound_overlays(cell.config, cell.tau, bounds);
    }
    cell.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    cells.push_back(std::move(cell));
  }
  return cells;
}

SlopeFit diversity_slope(const std::vector<double>& snr_linear, const std::vector<double>& pmd, double lo, double hi) {
  if (snr_linear.size() != pmd.size()) throw std::invalid_argument("diversity_slope: length mismatch");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < pmd.size(); ++i) {
    if (pmd[i] >= lo && pmd[i] <= hi && pmd[i] > 0.0 && snr_linear[i] > 0.0) {
      xs.push_back(std::log10(snr_linear[i]));
      ys.push_back(std::log10(pmd[i]));
    }
  }
  const std::size_t k = xs.size();
  if (k < 3) throw std::invalid_argument("diversity_slope: fewer than three points inside the window");
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(k);
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(k);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  SlopeFit fit;
  fit.points = k;
  fit.slope = sxy / sxx;
  const double intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double r = ys[i] - (intercept + fit.slope * xs[i]);
    sse += r * r;
  }
  fit.stderr_ = std::sqrt(sse / static_cast<double>(k - 2) / sxx);
  return fit;
}

SlopeFit diversity_slope(const std::vector<MetricsSummary>& summaries, double lo, double hi) {
  std::vector<double> snr, pmd;
  for (const auto& s : summaries) {
    snr.push_back(1.0 / s.config.sigma2());
    pmd.push_back(s.pmd.value);
  }
  return diversity_slope(snr, pmd, lo, hi);
}

}  // namespace hierdetect::sim
