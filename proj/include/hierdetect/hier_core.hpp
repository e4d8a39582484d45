#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hierdetect {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;

class dimension_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Structural sizes of a detection problem.
///
/// `n` is the signal-space dimension, `u` the number of users, `s` the block
/// (cyclic-prefix) length, `k_u`/`k_s` the block and in-block sparsity and
/// `m` the number of retained measurements. Blocks are laid out contiguously
/// so the compound vector occupies the first `u * s` of the `n` coordinates.
struct ProblemDims {
  std::size_t n = 0;
  std::size_t u = 0;
  std::size_t s = 0;
  std::size_t k_u = 0;
  std::size_t k_s = 0;
  std::size_t m = 0;

  std::size_t compound_size() const { return u * s; }

  /// Throws dimension_error if any structural constraint is violated.
  void validate() const;

  /// Same as above but returns the message instead of throwing; empty if valid.
  std::string check() const;

  bool operator==(const ProblemDims&) const = default;
};

/// Compound complex vector of `u` blocks of length `s`.
class HierVector {
 public:
  HierVector() = default;
  HierVector(std::size_t u, std::size_t s) : u_(u), s_(s), data_(u * s) {}
  HierVector(std::size_t u, std::size_t s, cvec data);

  std::size_t blocks() const { return u_; }
  std::size_t block_size() const { return s_; }
  std::size_t size() const { return data_.size(); }

  cplx& operator()(std::size_t block, std::size_t offset) { return data_[block * s_ + offset]; }
  const cplx& operator()(std::size_t block, std::size_t offset) const {
    return data_[block * s_ + offset];
  }

  std::span<cplx> block(std::size_t i) { return {data_.data() + i * s_, s_}; }
  std::span<const cplx> block(std::size_t i) const { return {data_.data() + i * s_, s_}; }

  cvec& data() { return data_; }
  const cvec& data() const { return data_; }

  double norm_squared() const;

  bool operator==(const HierVector&) const = default;

 private:
  std::size_t u_ = 0;
  std::size_t s_ = 0;
  cvec data_;
};

/// Hierarchical support: sorted active block indices, each with its sorted
/// within-block offsets. `offsets[k]` belongs to `blocks[k]`.
struct HierSupport {
  std::vector<std::size_t> blocks;
  std::vector<std::vector<std::size_t>> offsets;

  std::size_t total_size() const;
  bool contains_block(std::size_t block) const;
  bool contains(std::size_t block, std::size_t offset) const;

  /// Adds (block, offset) keeping both levels sorted; duplicates are ignored.
  void insert(std::size_t block, std::size_t offset);

  /// True when at most k_u blocks are present and each carries at most k_s
  /// offsets, all within [0, u) x [0, s).
  bool is_hier_sparse(std::size_t k_u, std::size_t k_s, std::size_t u, std::size_t s) const;

  bool operator==(const HierSupport&) const = default;
};

/// Squared l2-norm of every block.
std::vector<double> block_energies(const HierVector& h, const ProblemDims& dims);

/// Blocks whose squared norm is at least `xi` (inclusive).
std::vector<std::size_t> block_threshold(const HierVector& h, double xi, const ProblemDims& dims);

/// Support of the best (k_u, k_s)-sparse approximation of `x`: the k_s
/// largest-magnitude entries per block, then the k_u blocks with the largest
/// truncated energy. Ties go to the lower index at both levels.
HierSupport hier_threshold(const HierVector& x, std::size_t k_u, std::size_t k_s,
                           const ProblemDims& dims);

/// Copy of `x` on `support`, zero elsewhere.
HierVector project_to_support(const HierVector& x, const HierSupport& support);

}  // namespace hierdetect
