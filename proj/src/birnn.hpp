#pragma once

#include <string>
#include <vector>

#include "rulesp/autodiff.hpp"
#include "rulesp/params.hpp"

namespace rulesp {

/// Parameter block indices of a bidirectional tanh RNN.
struct BiRnnBlocks {
  std::size_t fw_x, fw_h, fw_b, bw_x, bw_h, bw_b;
  Eigen::Index hidden = 0;

  static BiRnnBlocks add(ParameterSet& p, const std::string& prefix, Eigen::Index in, Eigen::Index hidden) {
    BiRnnBlocks b;
    b.hidden = hidden;
    b.fw_x = p.add(prefix + ".fw_x", hidden, in);
    b.fw_h = p.add(prefix + ".fw_h", hidden, hidden);
    b.fw_b = p.add(prefix + ".fw_b", hidden, 1);
    b.bw_x = p.add(prefix + ".bw_x", hidden, in);
    b.bw_h = p.add(prefix + ".bw_h", hidden, hidden);
    b.bw_b = p.add(prefix + ".bw_b", hidden, 1);
    return b;
  }
};

struct BiRnnStates {
  std::vector<ad::Expr> fw, bw, both;
};

inline BiRnnStates run_birnn(ad::Graph& g, const BiRnnBlocks& b, const std::vector<ad::Expr>& xs) {
  BiRnnStates s;
  const std::size_t n = xs.size();
  s.fw.resize(n);
  s.bw.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.fw[i] = i == 0 ? g.tanh(g.affine(b.fw_b, {{b.fw_x, xs[i]}}))
                     : g.tanh(g.affine(b.fw_b, {{b.fw_x, xs[i]}, {b.fw_h, s.fw[i - 1]}}));
  }
  for (std::size_t k = n; k-- > 0;) {
    s.bw[k] = k + 1 == n ? g.tanh(g.affine(b.bw_b, {{b.bw_x, xs[k]}}))
                         : g.tanh(g.affine(b.bw_b, {{b.bw_x, xs[k]}, {b.bw_h, s.bw[k + 1]}}));
  }
  s.both.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ad::Expr pair[2] = {s.fw[i], s.bw[i]};
    s.both[i] = g.concat(pair);
  }
  return s;
}

}  // namespace rulesp
