#include "hierdetect/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hierdetect {

void DetectorConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("DetectorConfig: max_iters must be >= 1");
  if (!(ls_tolerance > 0.0)) throw std::invalid_argument("DetectorConfig: ls_tolerance must be > 0");
  if (ls_max_iters < 1) throw std::invalid_argument("DetectorConfig: ls_max_iters must be >= 1");
  if (!(step_tolerance >= 0.0)) throw std::invalid_argument("DetectorConfig: step_tolerance must be >= 0");
  if (!(residual_tolerance >= 0.0)) throw std::invalid_argument("DetectorConfig: residual_tolerance must be >= 0");
  if (!(xi >= 0.0)) throw std::invalid_argument("DetectorConfig: xi must be >= 0");
}

namespace {

double norm2(std::span<const cplx> v) {
  double acc = 0.0;
  for (const auto& x : v) acc += std::norm(x);
  return acc;
}

struct FlatSupport {
  std::vector<std::size_t> index;  // flat compound indices

  explicit FlatSupport(const HierSupport& s, std::size_t block_size) {
    for (std::size_t k = 0; k < s.blocks.size(); ++k)
      for (auto j : s.offsets[k]) index.push_back(s.blocks[k] * block_size + j);
  }
};

void check_inputs(const FourierMeasurement& a, std::span<const cplx> y, const ProblemDims& dims) {
  dims.validate();
  if (a.n() != dims.n || a.m() != dims.m) throw dimension_error("measurement operator does not match dims");
  if (y.size() != dims.m) throw dimension_error("measurement vector must have length m");
}

cvec residual_of(const FourierMeasurement& a, std::span<const cplx> y, const HierVector& h) {
  cvec r = apply_measurement(a, embed(h, a.n()));
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = y[k] - r[k];
  return r;
}

enum class Update { LeastSquares, Gradient };

DetectionOutcome hier_pursuit(const FourierMeasurement& a, std::span<const cplx> y, const ProblemDims& dims,
                              const DetectorConfig& cfg, Update update) {
  check_inputs(a, y, dims);
  cfg.validate();

  DetectionOutcome out;
  HierVector h(dims.u, dims.s);
  cvec r(y.begin(), y.end());
  const double y_norm = std::sqrt(norm2(y));

  for (std::size_t t = 1; t <= cfg.max_iters; ++t) {
    HierVector proxy = restrict_to_blocks(apply_adjoint(a, r), dims);
    for (std::size_t k = 0; k < proxy.size(); ++k) proxy.data()[k] += h.data()[k];

    HierSupport support = hier_threshold(proxy, dims.k_u, dims.k_s, dims);

    HierVector next;
    if (update == Update::LeastSquares) {
      auto ls = restricted_least_squares(a, y, support, dims, cfg);
      out.ls_converged = out.ls_converged && ls.converged;
      next = std::move(ls.h);
    } else {
      next = project_to_support(proxy, support);
    }

    double step = 0.0;
    for (std::size_t k = 0; k < next.size(); ++k) step += std::norm(next.data()[k] - h.data()[k]);
    step = std::sqrt(step);

    r = residual_of(a, y, next);
    const double res = std::sqrt(norm2(r));
    const bool repeated = !out.support_history.empty() && out.support_history.back() == support;

    out.support_history.push_back(std::move(support));
    out.residual_history.push_back(res);
    out.iterations = t;
    h = std::move(next);

    bool stop = false;
    switch (cfg.stop_rule) {
      case StopRule::SupportFixedPoint:
        stop = repeated &&
               (update == Update::LeastSquares || step <= cfg.step_tolerance * std::sqrt(h.norm_squared()));
        break;
      case StopRule::ResidualTolerance:
        stop = res <= cfg.residual_tolerance * y_norm;
        break;
      case StopRule::MaxIters:
        break;
    }
    if (stop) break;
  }

  out.h_hat = std::move(h);
  out.active_users = detect_users(out.h_hat, out.support_history.back(), cfg.xi, dims);
  return out;
}

}  // namespace

LeastSquaresResult restricted_least_squares(const FourierMeasurement& a, std::span<const cplx> y,
                                            const HierSupport& support, const ProblemDims& dims,
                                            const DetectorConfig& cfg) {
  check_inputs(a, y, dims);
  if (!support.is_hier_sparse(dims.u, dims.s, dims.u, dims.s))
    throw std::out_of_range("restricted_least_squares: support outside the compound vector");
  const FlatSupport flat(support, dims.s);
  const std::size_t k = flat.index.size();
  if (k > dims.m)
    throw underdetermined_support("restricted_least_squares: support of size " + std::to_string(k) +
                                  " exceeds m = " + std::to_string(dims.m));

  LeastSquaresResult res;
  res.h = HierVector(dims.u, dims.s);
  if (k == 0) {
    res.residual = std::sqrt(norm2(y));
    return res;
  }

  cvec full(dims.n);
  auto forward = [&](const cvec& coeff) {
    std::fill(full.begin(), full.end(), cplx{});
    for (std::size_t q = 0; q < k; ++q) full[flat.index[q]] = coeff[q];
    return apply_measurement(a, full);
  };
  auto backward = [&](const cvec& v) {
    cvec g = apply_adjoint(a, v);
    cvec coeff(k);
    for (std::size_t q = 0; q < k; ++q) coeff[q] = g[flat.index[q]];
    return coeff;
  };

  // CGLS
  cvec x(k);
  cvec r(y.begin(), y.end());
  cvec s = backward(r);
  cvec p = s;
  double gamma = norm2(s);
  const double s0 = std::sqrt(gamma);
  bool converged = s0 == 0.0;
  std::size_t it = 0;
  while (!converged && it < cfg.ls_max_iters) {
    ++it;
    cvec q = forward(p);
    const double qq = norm2(q);
    if (qq == 0.0) break;
    const double alpha = gamma / qq;
    for (std::size_t i = 0; i < k; ++i) x[i] += alpha * p[i];
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= alpha * q[i];
    s = backward(r);
    const double gamma_next = norm2(s);
    if (std::sqrt(gamma_next) <= cfg.ls_tolerance * s0) {
      converged = true;
      break;
    }
    const double beta = gamma_next / gamma;
    gamma = gamma_next;
    for (std::size_t i = 0; i < k; ++i) p[i] = s[i] + beta * p[i];
  }

  for (std::size_t q = 0; q < k; ++q) res.h.data()[flat.index[q]] = x[q];
  res.iterations = it;
  res.converged = converged;
  res.residual = std::sqrt(norm2(residual_of(a, y, res.h)));
  return res;
}

DetectionOutcome hihtp(const FourierMeasurement& a, std::span<const cplx> y, const ProblemDims& dims,
                       const DetectorConfig& cfg) {
  return hier_pursuit(a, y, dims, cfg, Update::LeastSquares);
}

DetectionOutcome hiiht(const FourierMeasurement& a, std::span<const cplx> y, const ProblemDims& dims,
                       const DetectorConfig& cfg) {
  return hier_pursuit(a, y, dims, cfg, Update::Gradient);
}

std::vector<std::size_t> detect_users(const HierVector& h_hat, const HierSupport& support, double xi,
                                      const ProblemDims& dims) {
  if (!(xi >= 0.0)) throw std::invalid_argument("detect_users: xi must be non-negative");
  const auto energy = block_energies(h_hat, dims);
  std::vector<std::size_t> out;
  for (auto b : support.blocks)
    if (energy.at(b) >= xi) out.push_back(b);
  return out;
}

std::vector<std::size_t> select_users(std::span<const double> statistics, double xi, std::size_t k_u) {
  if (!(xi >= 0.0)) throw std::invalid_argument("select_users: xi must be non-negative");
  std::vector<std::size_t> out;
  if (xi > 0.0) {
    for (std::size_t i = 0; i < statistics.size(); ++i)
      if (statistics[i] >= xi) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> order(statistics.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t k = std::min(k_u, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return statistics[a] > statistics[b] || (statistics[a] == statistics[b] && a < b);
                    });
  out.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> block_correlator(std::span<const cplx> y, const SignatureSet& sig, const ProblemDims& dims,
                                          double xi) {
  const auto corr = correlate_all_shifts(y, sig, dims);
  const auto stats = block_energies(corr, dims);
  return select_users(stats, xi, dims.k_u);
}

std::vector<double> ideal_orthogonal_statistics(const HierVector& h, double sigma2, const ProblemDims& dims,
                                                Rng& rng) {
  if (h.blocks() != dims.u || h.block_size() != dims.s) throw dimension_error("ideal_orthogonal_statistics: shape");
  const double n = static_cast<double>(dims.n);
  const double root_n = std::sqrt(n);
  std::vector<double> stats(dims.u, 0.0);
  for (std::size_t i = 0; i < dims.u; ++i)
    for (std::size_t j = 0; j < dims.s; ++j)
      stats[i] += std::norm(n * h(i, j) + root_n * complex_gaussian(rng, sigma2));
  return stats;
}

}  // namespace hierdetect
