#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "rulesp/params.hpp"

namespace rulesp::ad {

using Vec = Eigen::VectorXd;

struct Expr {
  int id = -1;
};

inline constexpr std::size_t kNoBias = std::numeric_limits<std::size_t>::max();

/// Single-use reverse-mode computation graph over column vectors. Parameters
/// are read from a ParameterSet; backward() accumulates into `grads`.
class Graph {
 public:
  explicit Graph(const ParameterSet& params, ParameterSet* grads = nullptr);

  Expr input(Vec v);
  /// A whole parameter block viewed as a column vector (biases, scalars).
  Expr param(std::size_t block);
  /// Column `col` of a parameter matrix (embedding lookup).
  Expr lookup(std::size_t block, Eigen::Index col);
  /// bias + sum_k W_k x_k
  Expr affine(std::size_t bias_block, std::initializer_list<std::pair<std::size_t, Expr>> terms);
  Expr matvec(std::size_t block, Expr x) { return affine(kNoBias, {{block, x}}); }

  Expr add(Expr a, Expr b);
  Expr sum(std::span<const Expr> xs);
  Expr mean(std::span<const Expr> xs);
  Expr tanh(Expr a);
  Expr concat(std::span<const Expr> xs);
  /// 1-dimensional a . b
  Expr dot(Expr a, Expr b);
  /// Stacks 1-dimensional expressions into a vector.
  Expr stack(std::span<const Expr> xs);
  Expr softmax(Expr a);
  /// sum_i w[i] * xs[i]
  Expr weighted_sum(Expr w, std::span<const Expr> xs);
  /// s[0] * v
  Expr scale(Expr s, Expr v);
  /// -log softmax(scores)[target]
  Expr pick_nll(Expr scores, int target);
  /// -log sum_{t in targets} softmax(scores)[t]
  Expr set_nll(Expr scores, std::span<const int> targets);

  const Vec& value(Expr e) const { return nodes_[static_cast<std::size_t>(e.id)].value; }
  double scalar(Expr e) const { return value(e)(0); }
  std::size_t size() const { return nodes_.size(); }

  /// Backpropagates d(root)/d(params) into the gradient set given at construction.
  void backward(Expr root);

 private:
  enum class Op { Input, Param, Lookup, Affine, Add, Sum, Mean, Tanh, Concat, Dot, Stack, Softmax, WeightedSum,
                  Scale, PickNll, SetNll };

  struct Node {
    Op op = Op::Input;
    int arg0 = -1;
    int arg1 = -1;
    int args_begin = 0;
    int args_count = 0;
    std::size_t block = kNoBias;
    Eigen::Index aux = 0;
    Vec value;
    Vec grad;
  };

  Expr push(Node n);
  Vec& grad_of(int id);
  std::span<const int> args(const Node& n) const {
    return {ints_.data() + n.args_begin, static_cast<std::size_t>(n.args_count)};
  }
  int store_args(std::span<const Expr> xs);

  const ParameterSet& params_;
  ParameterSet* grads_;
  std::vector<Node> nodes_;
  std::vector<int> ints_;
};

}  // namespace rulesp::ad
