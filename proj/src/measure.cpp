#include "hierdetect/measure.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>

namespace hierdetect {

namespace {

std::mutex& planner_mutex() {
  static std::mutex mu;
  return mu;
}

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }
fftw_complex* as_fftw(const cplx* p) { return reinterpret_cast<fftw_complex*>(const_cast<cplx*>(p)); }

}  // namespace

Fft::Fft(std::size_t n) : n_(n) {
  cvec a(n), b(n);
  const int len = static_cast<int>(n);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  fwd_ = fftw_plan_dft_1d(len, as_fftw(a.data()), as_fftw(b.data()), FFTW_FORWARD, flags);
  bwd_ = fftw_plan_dft_1d(len, as_fftw(a.data()), as_fftw(b.data()), FFTW_BACKWARD, flags);
  if (!fwd_ || !bwd_) throw std::runtime_error("FFTW planning failed for n = " + std::to_string(n));
}

Fft::~Fft() {
  std::lock_guard lock(planner_mutex());
  if (fwd_) fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  if (bwd_) fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
}

std::shared_ptr<const Fft> Fft::of_size(std::size_t n) {
  if (n == 0) throw dimension_error("FFT length must be positive");
  static std::map<std::size_t, std::shared_ptr<const Fft>> cache;
  std::lock_guard lock(planner_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::shared_ptr<const Fft> plan(new Fft(n));
  cache.emplace(n, plan);
  return plan;
}

void Fft::forward(const cplx* in, cplx* out) const {
  fftw_execute_dft(static_cast<fftw_plan>(fwd_), as_fftw(in), as_fftw(out));
}

void Fft::backward(const cplx* in, cplx* out) const {
  fftw_execute_dft(static_cast<fftw_plan>(bwd_), as_fftw(in), as_fftw(out));
}

cvec unitary_dft(std::span<const cplx> x) {
  auto fft = Fft::of_size(x.size());
  cvec out(x.size());
  fft->forward(x.data(), out.data());
  const double scale = 1.0 / std::sqrt(static_cast<double>(x.size()));
  for (auto& v : out) v *= scale;
  return out;
}

cvec unitary_idft(std::span<const cplx> x) {
  auto fft = Fft::of_size(x.size());
  cvec out(x.size());
  fft->backward(x.data(), out.data());
  const double scale = 1.0 / std::sqrt(static_cast<double>(x.size()));
  for (auto& v : out) v *= scale;
  return out;
}

FourierMeasurement::FourierMeasurement(std::size_t n, std::vector<std::size_t> row_set, cvec phases)
    : n_(n), rows_(std::move(row_set)), phases_(std::move(phases)) {
  if (rows_.empty() || rows_.size() > n_) throw dimension_error("FourierMeasurement: need 1 <= m <= n rows");
  if (phases_.size() != rows_.size()) throw dimension_error("FourierMeasurement: one phase per row required");
  std::vector<std::size_t> sorted = rows_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("FourierMeasurement: duplicate row index");
  if (sorted.back() >= n_) throw std::out_of_range("FourierMeasurement: row index outside [0, n)");
  for (const auto& p : phases_)
    if (std::abs(std::abs(p) - 1.0) > 1e-12) throw std::invalid_argument("FourierMeasurement: phases must be unit modulus");
  norm_ = std::sqrt(static_cast<double>(n_) / static_cast<double>(rows_.size()));
  fft_ = Fft::of_size(n_);
}

NoiseSpec NoiseSpec::from_snr_db(double snr_db, NoiseModel model) {
  return NoiseSpec{std::pow(10.0, -snr_db / 10.0), model};
}

std::vector<std::size_t> make_control_window(std::size_t n, std::size_t m, Rng& rng) {
  if (m < 1 || m > n) throw dimension_error("make_control_window: need 1 <= m <= n");
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  // partial Fisher-Yates
  for (std::size_t k = 0; k < m; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, n - 1);
    std::swap(pool[k], pool[pick(rng)]);
  }
  pool.resize(m);
  std::sort(pool.begin(), pool.end());
  return pool;
}

SignatureSet make_signature(const std::vector<std::size_t>& row_set, std::size_t n, std::size_t shift_stride,
                            Rng& rng, bool random_phases) {
  if (row_set.empty() || row_set.size() > n) throw dimension_error("make_signature: invalid control window");
  SignatureSet sig;
  sig.shift_stride = shift_stride;
  sig.row_set = row_set;
  sig.phases.resize(row_set.size(), cplx{1.0, 0.0});
  sig.spectrum.assign(n, cplx{});
  const double mag = std::sqrt(static_cast<double>(n) / static_cast<double>(row_set.size()));
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (std::size_t k = 0; k < row_set.size(); ++k) {
    if (row_set[k] >= n) throw std::out_of_range("make_signature: row index outside [0, n)");
    if (random_phases) sig.phases[k] = std::polar(1.0, angle(rng));
    sig.spectrum[row_set[k]] = mag * sig.phases[k];
  }
  sig.p0 = unitary_idft(sig.spectrum);
  return sig;
}

FourierMeasurement measurement_from_signature(const SignatureSet& sig) {
  return FourierMeasurement(sig.p0.size(), sig.row_set, sig.phases);
}

cvec apply_measurement(const FourierMeasurement& a, std::span<const cplx> x) {
  if (x.size() != a.n()) throw dimension_error("apply_measurement: input length must equal n");
  cvec spec(a.n());
  a.fft().forward(x.data(), spec.data());
  // sqrt(n/m) * n^{-1/2} = 1/sqrt(m)
  const double scale = 1.0 / std::sqrt(static_cast<double>(a.m()));
  cvec out(a.m());
  const auto& rows = a.row_set();
  const auto& ph = a.phases();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = ph[k] * spec[rows[k]] * scale;
  return out;
}

cvec apply_adjoint(const FourierMeasurement& a, std::span<const cplx> y) {
  if (y.size() != a.m()) throw dimension_error("apply_adjoint: input length must equal m");
  cvec spec(a.n());
  const double scale = 1.0 / std::sqrt(static_cast<double>(a.m()));
  const auto& rows = a.row_set();
  const auto& ph = a.phases();
  for (std::size_t k = 0; k < y.size(); ++k) spec[rows[k]] = std::conj(ph[k]) * y[k] * scale;
  cvec out(a.n());
  a.fft().backward(spec.data(), out.data());
  return out;
}

cvec sample_noise(const NoiseSpec& spec, const ProblemDims& dims, Rng& rng) {
  if (!(spec.sigma2 > 0.0)) throw std::invalid_argument("sample_noise: sigma2 must be positive");
  const double n = static_cast<double>(dims.n);
  const double m = static_cast<double>(dims.m);
  std::size_t len = 0;
  double var = 0.0;
  if (spec.model == NoiseModel::MeasurementDomain) {
    len = dims.m;
    var = spec.sigma2 / n;
  } else {
    len = dims.n;
    var = spec.sigma2 * m / (n * n);
  }
  cvec z(len);
  for (auto& v : z) v = complex_gaussian(rng, var);
  return z;
}

cvec apply_signature_matrix(const SignatureSet& sig, std::span<const cplx> x) {
  const std::size_t n = sig.p0.size();
  if (x.size() != n) throw dimension_error("apply_signature_matrix: input length must equal n");
  auto fft = Fft::of_size(n);
  cvec xs(n), ps(n), out(n);
  fft->forward(x.data(), xs.data());
  fft->forward(sig.p0.data(), ps.data());
  for (std::size_t k = 0; k < n; ++k) xs[k] *= ps[k] / static_cast<double>(n);
  fft->backward(xs.data(), out.data());
  return out;
}

HierVector correlate_all_shifts(std::span<const cplx> y, const SignatureSet& sig, const ProblemDims& dims) {
  const std::size_t n = sig.p0.size();
  if (y.size() != n || dims.n != n) throw dimension_error("correlate_all_shifts: received vector must have length n");
  if (dims.u * sig.shift_stride > n || dims.s > sig.shift_stride)
    throw dimension_error("correlate_all_shifts: shifts exceed signal length");
  auto fft = Fft::of_size(n);
  cvec ys(n), ps(n), c(n);
  fft->forward(y.data(), ys.data());
  fft->forward(sig.p0.data(), ps.data());
  for (std::size_t k = 0; k < n; ++k) ys[k] *= std::conj(ps[k]) / static_cast<double>(n);
  fft->backward(ys.data(), c.data());
  HierVector out(dims.u, dims.s);
  for (std::size_t i = 0; i < dims.u; ++i)
    for (std::size_t j = 0; j < dims.s; ++j) out(i, j) = c[i * sig.shift_stride + j];
  return out;
}

cvec embed(const HierVector& h, std::size_t n) {
  if (h.size() > n) throw dimension_error("embed: compound vector longer than n");
  cvec x(n);
  std::copy(h.data().begin(), h.data().end(), x.begin());
  return x;
}

HierVector restrict_to_blocks(std::span<const cplx> x, const ProblemDims& dims) {
  if (x.size() < dims.u * dims.s) throw dimension_error("restrict_to_blocks: vector shorter than u*s");
  return HierVector(dims.u, dims.s, cvec(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(dims.u * dims.s)));
}

}  // namespace hierdetect
