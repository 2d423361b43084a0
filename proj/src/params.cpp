#include "rulesp/params.hpp"

#include <cstring>
#include <stdexcept>

namespace rulesp {

std::size_t ParameterSet::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  names_.push_back(std::move(name));
  blocks_.push_back(Eigen::MatrixXd::Zero(rows, cols));
  return blocks_.size() - 1;
}

std::size_t ParameterSet::size() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += static_cast<std::size_t>(b.size());
  return n;
}

double& ParameterSet::at(std::size_t k) {
  for (auto& b : blocks_) {
    auto n = static_cast<std::size_t>(b.size());
    if (k < n) return b.data()[k];
    k -= n;
  }
  throw std::out_of_range("parameter coordinate out of range");
}

double ParameterSet::at(std::size_t k) const { return const_cast<ParameterSet*>(this)->at(k); }

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet z;
  z.names_ = names_;
  z.blocks_.reserve(blocks_.size());
  for (const auto& b : blocks_) z.blocks_.push_back(Eigen::MatrixXd::Zero(b.rows(), b.cols()));
  return z;
}

void ParameterSet::set_zero() {
  for (auto& b : blocks_) b.setZero();
}

void ParameterSet::axpy(double a, const ParameterSet& x) {
  if (!same_shape(x)) throw std::invalid_argument("axpy on parameter sets of different shape");
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].noalias() += a * x.blocks_[i];
}

double ParameterSet::squared_norm() const {
  double s = 0;
  for (const auto& b : blocks_) s += b.squaredNorm();
  return s;
}

bool ParameterSet::all_finite() const {
  for (const auto& b : blocks_)
    if (!b.allFinite()) return false;
  return true;
}

bool ParameterSet::same_shape(const ParameterSet& other) const {
  if (blocks_.size() != other.blocks_.size()) return false;
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    if (blocks_[i].rows() != other.blocks_[i].rows() || blocks_[i].cols() != other.blocks_[i].cols()) return false;
  return true;
}

void ParameterSet::randomize(std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& b : blocks_)
    for (Eigen::Index k = 0; k < b.size(); ++k) b.data()[k] = dist(rng);
}

bool bit_identical(const ParameterSet& a, const ParameterSet& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.num_blocks(); ++i)
    if (std::memcmp(a[i].data(), b[i].data(), sizeof(double) * static_cast<std::size_t>(a[i].size())) != 0)
      return false;
  return true;
}

}  // namespace rulesp
