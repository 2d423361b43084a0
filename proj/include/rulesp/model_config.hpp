#pragma once

#include <cstddef>
#include <cstdint>

namespace rulesp {

struct ModelConfig {
  std::size_t embedding_dim = 64;
  std::size_t hidden_dim = 128;
  std::size_t vocab_cap = 20000;
  /// Words rarer than this in the training questions map to <unk>.
  std::size_t min_count = 1;
  /// Std-dev of the Gaussian initialization.
  double init_scale = 0.1;
  std::uint64_t seed = 1;

  /// Throws ConfigError unless every dimension is positive.
  void validate() const;
  /// Hash of the shape-determining fields (the seed is excluded).
  std::uint64_t hash() const;
};

}  // namespace rulesp
