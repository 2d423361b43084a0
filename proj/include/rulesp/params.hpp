#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace rulesp {

/// An ordered list of named dense parameter blocks. Values are plain data:
/// copying a ParameterSet snapshots the parameters.
class ParameterSet {
 public:
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols);

  std::size_t num_blocks() const { return blocks_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  Eigen::MatrixXd& operator[](std::size_t i) { return blocks_[i]; }
  const Eigen::MatrixXd& operator[](std::size_t i) const { return blocks_[i]; }

  /// Total number of scalar parameters.
  std::size_t size() const;
  /// Flat coordinate access, blocks in order, each column-major.
  double& at(std::size_t k);
  double at(std::size_t k) const;

  ParameterSet zeros_like() const;
  void set_zero();
  /// this += a * x
  void axpy(double a, const ParameterSet& x);
  double squared_norm() const;
  bool all_finite() const;
  bool same_shape(const ParameterSet& other) const;

  /// Gaussian init with the given std-dev for every block.
  void randomize(std::mt19937_64& rng, double stddev);

 private:
  std::vector<std::string> names_;
  std::vector<Eigen::MatrixXd> blocks_;
};

/// Bitwise equality of shapes and every stored double.
bool bit_identical(const ParameterSet& a, const ParameterSet& b);

struct LossGrad {
  double loss = 0;
  ParameterSet grad;
};

}  // namespace rulesp
