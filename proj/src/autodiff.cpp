#include "rulesp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rulesp::ad {
namespace {

double log_sum_exp(const Vec& v) {
  double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

Graph::Graph(const ParameterSet& params, ParameterSet* grads) : params_(params), grads_(grads) {
  nodes_.reserve(256);
  ints_.reserve(512);
}

Expr Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return Expr{static_cast<int>(nodes_.size() - 1)};
}

int Graph::store_args(std::span<const Expr> xs) {
  int begin = static_cast<int>(ints_.size());
  for (auto x : xs) ints_.push_back(x.id);
  return begin;
}

Vec& Graph::grad_of(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Vec::Zero(n.value.size());
  return n.grad;
}

Expr Graph::input(Vec v) {
  Node n;
  n.op = Op::Input;
  n.value = std::move(v);
  return push(std::move(n));
}

Expr Graph::param(std::size_t block) {
  Node n;
  n.op = Op::Param;
  n.block = block;
  n.value = params_[block].reshaped();
  return push(std::move(n));
}

Expr Graph::lookup(std::size_t block, Eigen::Index col) {
  Node n;
  n.op = Op::Lookup;
  n.block = block;
  n.aux = col;
  n.value = params_[block].col(col);
  return push(std::move(n));
}

Expr Graph::affine(std::size_t bias_block, std::initializer_list<std::pair<std::size_t, Expr>> terms) {
  Node n;
  n.op = Op::Affine;
  n.block = bias_block;
  n.args_begin = static_cast<int>(ints_.size());
  n.args_count = static_cast<int>(terms.size() * 2);
  bool first = true;
  for (const auto& [blk, x] : terms) {
    ints_.push_back(static_cast<int>(blk));
    ints_.push_back(x.id);
    const auto& W = params_[blk];
    const Vec& xv = value(x);
    if (W.cols() != xv.size()) throw std::invalid_argument("affine: shape mismatch for block " + params_.name(blk));
    if (first) {
      n.value.noalias() = W * xv;
      first = false;
    } else {
      n.value.noalias() += W * xv;
    }
  }
  if (bias_block != kNoBias) n.value += params_[bias_block].reshaped();
  return push(std::move(n));
}

Expr Graph::add(Expr a, Expr b) {
  Node n;
  n.op = Op::Add;
  n.arg0 = a.id;
  n.arg1 = b.id;
  n.value = value(a) + value(b);
  return push(std::move(n));
}

Expr Graph::sum(std::span<const Expr> xs) {
  if (xs.empty()) throw std::invalid_argument("sum of no expressions");
  Node n;
  n.op = Op::Sum;
  n.args_begin = store_args(xs);
  n.args_count = static_cast<int>(xs.size());
  n.value = value(xs[0]);
  for (std::size_t i = 1; i < xs.size(); ++i) n.value += value(xs[i]);
  return push(std::move(n));
}

Expr Graph::mean(std::span<const Expr> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of no expressions");
  Node n;
  n.op = Op::Mean;
  n.args_begin = store_args(xs);
  n.args_count = static_cast<int>(xs.size());
  n.value = value(xs[0]);
  for (std::size_t i = 1; i < xs.size(); ++i) n.value += value(xs[i]);
  n.value /= static_cast<double>(xs.size());
  return push(std::move(n));
}

Expr Graph::tanh(Expr a) {
  Node n;
  n.op = Op::Tanh;
  n.arg0 = a.id;
  n.value = value(a).array().tanh();
  return push(std::move(n));
}

Expr Graph::concat(std::span<const Expr> xs) {
  Node n;
  n.op = Op::Concat;
  n.args_begin = store_args(xs);
  n.args_count = static_cast<int>(xs.size());
  Eigen::Index total = 0;
  for (auto x : xs) total += value(x).size();
  n.value.resize(total);
  Eigen::Index off = 0;
  for (auto x : xs) {
    const Vec& v = value(x);
    n.value.segment(off, v.size()) = v;
    off += v.size();
  }
  return push(std::move(n));
}

Expr Graph::dot(Expr a, Expr b) {
  Node n;
  n.op = Op::Dot;
  n.arg0 = a.id;
  n.arg1 = b.id;
  n.value = Vec::Constant(1, value(a).dot(value(b)));
  return push(std::move(n));
}

Expr Graph::stack(std::span<const Expr> xs) {
  Node n;
  n.op = Op::Stack;
  n.args_begin = store_args(xs);
  n.args_count = static_cast<int>(xs.size());
  n.value.resize(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) n.value(static_cast<Eigen::Index>(i)) = value(xs[i])(0);
  return push(std::move(n));
}

Expr Graph::softmax(Expr a) {
  Node n;
  n.op = Op::Softmax;
  n.arg0 = a.id;
  const Vec& v = value(a);
  n.value = (v.array() - v.maxCoeff()).exp();
  n.value /= n.value.sum();
  return push(std::move(n));
}

Expr Graph::weighted_sum(Expr w, std::span<const Expr> xs) {
  if (xs.empty() || value(w).size() != static_cast<Eigen::Index>(xs.size()))
    throw std::invalid_argument("weighted_sum: weight/item count mismatch");
  Node n;
  n.op = Op::WeightedSum;
  n.arg0 = w.id;
  n.args_begin = store_args(xs);
  n.args_count = static_cast<int>(xs.size());
  const Vec& wv = value(w);
  n.value = wv(0) * value(xs[0]);
  for (std::size_t i = 1; i < xs.size(); ++i) n.value += wv(static_cast<Eigen::Index>(i)) * value(xs[i]);
  return push(std::move(n));
}

Expr Graph::scale(Expr s, Expr v) {
  Node n;
  n.op = Op::Scale;
  n.arg0 = s.id;
  n.arg1 = v.id;
  n.value = value(s)(0) * value(v);
  return push(std::move(n));
}

Expr Graph::pick_nll(Expr scores, int target) {
  const Vec& s = value(scores);
  if (target < 0 || target >= s.size()) throw std::invalid_argument("pick_nll: target out of range");
  Node n;
  n.op = Op::PickNll;
  n.arg0 = scores.id;
  n.aux = target;
  n.value = Vec::Constant(1, log_sum_exp(s) - s(target));
  return push(std::move(n));
}

Expr Graph::set_nll(Expr scores, std::span<const int> target_span) {
  const Vec& s = value(scores);
  if (target_span.empty()) throw std::invalid_argument("set_nll: empty target set");
  std::vector<int> targets(target_span.begin(), target_span.end());
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  Node n;
  n.op = Op::SetNll;
  n.arg0 = scores.id;
  n.args_begin = static_cast<int>(ints_.size());
  n.args_count = static_cast<int>(targets.size());
  Vec sub(static_cast<Eigen::Index>(targets.size()));
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || targets[i] >= s.size()) throw std::invalid_argument("set_nll: target out of range");
    ints_.push_back(targets[i]);
    sub(static_cast<Eigen::Index>(i)) = s(targets[i]);
  }
  n.value = Vec::Constant(1, log_sum_exp(s) - log_sum_exp(sub));
  return push(std::move(n));
}

void Graph::backward(Expr root) {
  if (!grads_) throw std::logic_error("graph built without a gradient sink");
  grad_of(root.id) = Vec::Ones(value(root).size());
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) continue;
    const Vec& g = n.grad;
    switch (n.op) {
      case Op::Input:
        break;
      case Op::Param:
        (*grads_)[n.block].reshaped() += g;
        break;
      case Op::Lookup:
        (*grads_)[n.block].col(n.aux) += g;
        break;
      case Op::Affine: {
        auto a = args(n);
        for (std::size_t k = 0; k < a.size(); k += 2) {
          auto blk = static_cast<std::size_t>(a[k]);
          int x = a[k + 1];
          const auto& W = params_[blk];
          (*grads_)[blk].noalias() += g * nodes_[static_cast<std::size_t>(x)].value.transpose();
          if (nodes_[static_cast<std::size_t>(x)].op != Op::Input) grad_of(x).noalias() += W.transpose() * g;
        }
        if (n.block != kNoBias) (*grads_)[n.block].reshaped() += g;
        break;
      }
      case Op::Add:
        grad_of(n.arg0) += g;
        grad_of(n.arg1) += g;
        break;
      case Op::Sum:
        for (int a : args(n)) grad_of(a) += g;
        break;
      case Op::Mean: {
        double inv = 1.0 / n.args_count;
        for (int a : args(n)) grad_of(a) += inv * g;
        break;
      }
      case Op::Tanh:
        grad_of(n.arg0).array() += g.array() * (1.0 - n.value.array().square());
        break;
      case Op::Concat: {
        Eigen::Index off = 0;
        for (int a : args(n)) {
          Eigen::Index len = nodes_[static_cast<std::size_t>(a)].value.size();
          grad_of(a) += g.segment(off, len);
          off += len;
        }
        break;
      }
      case Op::Dot: {
        double g0 = g(0);
        grad_of(n.arg0) += g0 * nodes_[static_cast<std::size_t>(n.arg1)].value;
        grad_of(n.arg1) += g0 * nodes_[static_cast<std::size_t>(n.arg0)].value;
        break;
      }
      case Op::Stack: {
        auto a = args(n);
        for (std::size_t i = 0; i < a.size(); ++i) grad_of(a[i])(0) += g(static_cast<Eigen::Index>(i));
        break;
      }
      case Op::Softmax: {
        double gv = g.dot(n.value);
        grad_of(n.arg0).array() += n.value.array() * (g.array() - gv);
        break;
      }
      case Op::WeightedSum: {
        auto a = args(n);
        const Vec& w = nodes_[static_cast<std::size_t>(n.arg0)].value;
        Vec& gw = grad_of(n.arg0);
        for (std::size_t i = 0; i < a.size(); ++i) {
          auto ii = static_cast<Eigen::Index>(i);
          gw(ii) += g.dot(nodes_[static_cast<std::size_t>(a[i])].value);
          grad_of(a[i]) += w(ii) * g;
        }
        break;
      }
      case Op::Scale: {
        const Vec& s = nodes_[static_cast<std::size_t>(n.arg0)].value;
        const Vec& v = nodes_[static_cast<std::size_t>(n.arg1)].value;
        grad_of(n.arg0)(0) += g.dot(v);
        grad_of(n.arg1) += s(0) * g;
        break;
      }
      case Op::PickNll: {
        const Vec& s = nodes_[static_cast<std::size_t>(n.arg0)].value;
        Vec p = (s.array() - s.maxCoeff()).exp();
        p /= p.sum();
        p(n.aux) -= 1.0;
        grad_of(n.arg0) += g(0) * p;
        break;
      }
      case Op::SetNll: {
        const Vec& s = nodes_[static_cast<std::size_t>(n.arg0)].value;
        Vec p = (s.array() - s.maxCoeff()).exp();
        p /= p.sum();
        auto t = args(n);
        double zmax = -std::numeric_limits<double>::infinity();
        for (int k : t) zmax = std::max(zmax, s(k));
        double z = 0;
        for (int k : t) z += std::exp(s(k) - zmax);
        for (int k : t) p(k) -= std::exp(s(k) - zmax) / z;
        grad_of(n.arg0) += g(0) * p;
        break;
      }
    }
  }
}

}  // namespace rulesp::ad
