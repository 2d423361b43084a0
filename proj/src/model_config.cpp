#include "rulesp/model_config.hpp"

#include <string>

#include "rulesp/errors.hpp"
#include "rulesp/vocab.hpp"

namespace rulesp {

void ModelConfig::validate() const {
  if (embedding_dim == 0 || hidden_dim == 0 || vocab_cap == 0 || min_count == 0)
    throw ConfigError("model dimensions, vocabulary cap and min_count must be positive");
  if (!(init_scale > 0)) throw ConfigError("init_scale must be positive");
}

std::uint64_t ModelConfig::hash() const {
  std::string s = "emb=" + std::to_string(embedding_dim) + ";hid=" + std::to_string(hidden_dim) +
                  ";cap=" + std::to_string(vocab_cap) + ";min=" + std::to_string(min_count);
  return fnv1a(s);
}

}  // namespace rulesp
