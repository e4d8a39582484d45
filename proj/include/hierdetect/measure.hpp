#pragma once

#include <memory>
#include <span>

#include "hierdetect/hier_core.hpp"
#include "hierdetect/rng.hpp"

namespace hierdetect {

/// Unnormalized complex FFT of a fixed length backed by FFTW.
///
/// Plans are created once per length and shared; execution goes through the
/// new-array interface so one instance may be used from several threads.
class Fft {
 public:
  static std::shared_ptr<const Fft> of_size(std::size_t n);

  std::size_t size() const { return n_; }
  /// out[k] = sum_j in[j] exp(-2 pi i jk/n)
  void forward(const cplx* in, cplx* out) const;
  /// out[j] = sum_k in[k] exp(+2 pi i jk/n)
  void backward(const cplx* in, cplx* out) const;

  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;
  ~Fft();

 private:
  explicit Fft(std::size_t n);
  std::size_t n_;
  void* fwd_ = nullptr;
  void* bwd_ = nullptr;
};

/// Unitary DFT, (W x)_k = n^{-1/2} sum_j x_j exp(-2 pi i jk/n).
cvec unitary_dft(std::span<const cplx> x);
cvec unitary_idft(std::span<const cplx> x);

/// Subsampled, phase-decorated Fourier operator A = sqrt(n/m) diag(phases) W_B.
/// Every entry has magnitude 1/sqrt(m).
class FourierMeasurement {
 public:
  FourierMeasurement(std::size_t n, std::vector<std::size_t> row_set, cvec phases);

  std::size_t n() const { return n_; }
  std::size_t m() const { return rows_.size(); }
  const std::vector<std::size_t>& row_set() const { return rows_; }
  const cvec& phases() const { return phases_; }
  /// Scale applied on top of the unitary DFT rows, sqrt(n/m).
  double normalization() const { return norm_; }
  const Fft& fft() const { return *fft_; }

 private:
  std::size_t n_;
  std::vector<std::size_t> rows_;
  cvec phases_;
  double norm_;
  std::shared_ptr<const Fft> fft_;
};

enum class NoiseModel {
  /// z ~ CN(0, sigma2/n I_m) added after measurement.
  MeasurementDomain,
  /// z' ~ CN(0, sigma2 m/n^2 I_n) added to the signal before measurement.
  SignalDomain,
};

struct NoiseSpec {
  double sigma2 = 1.0;
  NoiseModel model = NoiseModel::MeasurementDomain;

  double snr() const { return 1.0 / sigma2; }
  static NoiseSpec from_snr_db(double snr_db, NoiseModel model = NoiseModel::MeasurementDomain);
};

/// Base pilot sequence with a flat magnitude spectrum sqrt(n/m) on the control
/// window and zero elsewhere. User i transmits the (i * shift_stride)-fold
/// cyclic shift of p0.
struct SignatureSet {
  cvec p0;
  cvec spectrum;  // unitary DFT of p0
  std::size_t shift_stride = 1;
  std::vector<std::size_t> row_set;
  cvec phases;  // spectrum phases on row_set, in row_set order
};

/// m distinct indices drawn uniformly from [0, n), returned in ascending order.
std::vector<std::size_t> make_control_window(std::size_t n, std::size_t m, Rng& rng);

SignatureSet make_signature(const std::vector<std::size_t>& row_set, std::size_t n, std::size_t shift_stride,
                            Rng& rng, bool random_phases = true);

FourierMeasurement measurement_from_signature(const SignatureSet& sig);

/// Full-FFT implementation of A x, length m.
cvec apply_measurement(const FourierMeasurement& a, std::span<const cplx> x);

/// A^H y, length n.
cvec apply_adjoint(const FourierMeasurement& a, std::span<const cplx> y);

/// Length m (MeasurementDomain) or n (SignalDomain) noise draw.
cvec sample_noise(const NoiseSpec& spec, const ProblemDims& dims, Rng& rng);

/// Circular convolution D(p) x = p0 (*) x for a length-n vector x.
cvec apply_signature_matrix(const SignatureSet& sig, std::span<const cplx> x);

/// Entry (i, j) = <y, p0 shifted by i*s + j>, i.e. D(p)^H y, via one FFT
/// correlation.
HierVector correlate_all_shifts(std::span<const cplx> y, const SignatureSet& sig, const ProblemDims& dims);

/// Zero-pads a compound vector to length n.
cvec embed(const HierVector& h, std::size_t n);
/// First u*s coordinates of a length-n vector as a compound vector.
HierVector restrict_to_blocks(std::span<const cplx> x, const ProblemDims& dims);

}  // namespace hierdetect
