#include "hierdetect/hier_core.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace hierdetect {

std::string ProblemDims::check() const {
  std::ostringstream err;
  if (n == 0) err << "n must be positive; ";
  if (u == 0) err << "u must be positive; ";
  if (s == 0) err << "s must be positive; ";
  if (u * s > n) err << "u*s = " << u * s << " exceeds n = " << n << "; ";
  if (k_u < 1 || k_u > u) err << "k_u must lie in [1, u]; ";
  if (k_s < 1 || k_s > s) err << "k_s must lie in [1, s]; ";
  if (m < 1 || m > n) err << "m must lie in [1, n]; ";
  std::string msg = err.str();
  if (msg.size() >= 2) msg.resize(msg.size() - 2);
  return msg;
}

void ProblemDims::validate() const {
  if (auto msg = check(); !msg.empty()) throw dimension_error("invalid problem dimensions: " + msg);
}

HierVector::HierVector(std::size_t u, std::size_t s, cvec data) : u_(u), s_(s), data_(std::move(data)) {
  if (data_.size() != u * s)
    throw dimension_error("HierVector data length " + std::to_string(data_.size()) +
                          " does not match u*s = " + std::to_string(u * s));
}

double HierVector::norm_squared() const {
  double acc = 0.0;
  for (const auto& v : data_) acc += std::norm(v);
  return acc;
}

std::size_t HierSupport::total_size() const {
  std::size_t total = 0;
  for (const auto& o : offsets) total += o.size();
  return total;
}

bool HierSupport::contains_block(std::size_t block) const {
  return std::binary_search(blocks.begin(), blocks.end(), block);
}

bool HierSupport::contains(std::size_t block, std::size_t offset) const {
  auto it = std::lower_bound(blocks.begin(), blocks.end(), block);
  if (it == blocks.end() || *it != block) return false;
  const auto& o = offsets[static_cast<std::size_t>(it - blocks.begin())];
  return std::binary_search(o.begin(), o.end(), offset);
}

void HierSupport::insert(std::size_t block, std::size_t offset) {
  auto it = std::lower_bound(blocks.begin(), blocks.end(), block);
  auto pos = static_cast<std::size_t>(it - blocks.begin());
  if (it == blocks.end() || *it != block) {
    blocks.insert(it, block);
    offsets.insert(offsets.begin() + static_cast<std::ptrdiff_t>(pos), std::vector<std::size_t>{});
  }
  auto& o = offsets[pos];
  auto jt = std::lower_bound(o.begin(), o.end(), offset);
  if (jt == o.end() || *jt != offset) o.insert(jt, offset);
}

bool HierSupport::is_hier_sparse(std::size_t k_u, std::size_t k_s, std::size_t u, std::size_t s) const {
  if (blocks.size() != offsets.size() || blocks.size() > k_u) return false;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    if (blocks[k] >= u) return false;
    if (k > 0 && blocks[k] <= blocks[k - 1]) return false;
    if (offsets[k].size() > k_s) return false;
    for (auto j : offsets[k])
      if (j >= s) return false;
  }
  return true;
}

namespace {

void check_shape(const HierVector& h, const ProblemDims& dims) {
  if (h.blocks() != dims.u || h.block_size() != dims.s)
    throw dimension_error("HierVector shape " + std::to_string(h.blocks()) + "x" +
                          std::to_string(h.block_size()) + " does not match dims " +
                          std::to_string(dims.u) + "x" + std::to_string(dims.s));
}

}  // namespace

std::vector<double> block_energies(const HierVector& h, const ProblemDims& dims) {
  check_shape(h, dims);
  std::vector<double> e(dims.u, 0.0);
  for (std::size_t i = 0; i < dims.u; ++i)
    for (const auto& v : h.block(i)) e[i] += std::norm(v);
  return e;
}

std::vector<std::size_t> block_threshold(const HierVector& h, double xi, const ProblemDims& dims) {
  if (!(xi >= 0.0)) throw std::invalid_argument("block_threshold: xi must be non-negative");
  auto e = block_energies(h, dims);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < e.size(); ++i)
    if (e[i] >= xi) out.push_back(i);
  return out;
}

HierSupport hier_threshold(const HierVector& x, std::size_t k_u, std::size_t k_s, const ProblemDims& dims) {
  check_shape(x, dims);
  if (k_u < 1 || k_u > dims.u || k_s < 1 || k_s > dims.s)
    throw std::invalid_argument("hier_threshold: sparsity (" + std::to_string(k_u) + ", " +
                                std::to_string(k_s) + ") outside [1,u] x [1,s]");

  const std::size_t s = dims.s;
  std::vector<double> mag(s);
  std::vector<std::size_t> order(s);
  std::vector<std::vector<std::size_t>> picked(dims.u);
  std::vector<double> energy(dims.u, 0.0);

  for (std::size_t i = 0; i < dims.u; ++i) {
    auto blk = x.block(i);
    for (std::size_t j = 0; j < s; ++j) mag[j] = std::norm(blk[j]);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto larger = [&](std::size_t a, std::size_t b) { return mag[a] > mag[b] || (mag[a] == mag[b] && a < b); };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_s - 1), order.end(), larger);
    picked[i].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_s));
    std::sort(picked[i].begin(), picked[i].end());
    for (auto j : picked[i]) energy[i] += mag[j];
  }

  std::vector<std::size_t> blocks(dims.u);
  std::iota(blocks.begin(), blocks.end(), std::size_t{0});
  auto stronger = [&](std::size_t a, std::size_t b) {
    return energy[a] > energy[b] || (energy[a] == energy[b] && a < b);
  };
  std::nth_element(blocks.begin(), blocks.begin() + static_cast<std::ptrdiff_t>(k_u - 1), blocks.end(), stronger);
  blocks.resize(k_u);
  std::sort(blocks.begin(), blocks.end());

  HierSupport out;
  out.blocks = blocks;
  for (auto b : blocks) out.offsets.push_back(std::move(picked[b]));
  return out;
}

HierVector project_to_support(const HierVector& x, const HierSupport& support) {
  HierVector out(x.blocks(), x.block_size());
  for (std::size_t k = 0; k < support.blocks.size(); ++k) {
    const auto b = support.blocks[k];
    if (b >= x.blocks()) throw std::out_of_range("project_to_support: block index out of range");
    for (auto j : support.offsets[k]) {
      if (j >= x.block_size()) throw std::out_of_range("project_to_support: offset out of range");
      out(b, j) = x(b, j);
    }
  }
  return out;
}

}  // namespace hierdetect
