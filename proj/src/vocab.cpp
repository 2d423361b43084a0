#include "rulesp/vocab.hpp"

#include <algorithm>
#include <map>

#include "rulesp/sql.hpp"

namespace rulesp {

std::vector<std::string> Vocab::reserved() {
  std::vector<std::string> r = {"<unk>", "<bos>", "<eos>", kAggMarker, kSelMarker, kWhereMarker, kAndMarker};
  for (auto a : kAllAggs) r.push_back(std::string("agg:") + agg_name(a));
  for (auto o : kAllOps) r.push_back(std::string("op:") + op_symbol(o));
  return r;
}

Vocab::Vocab() {
  for (const auto& w : reserved()) push(w);
}

void Vocab::push(const std::string& w) {
  if (index_.count(w)) return;
  index_.emplace(w, static_cast<int>(words_.size()));
  words_.push_back(w);
}

Vocab Vocab::build(const std::vector<Tokens>& corpus, std::size_t min_count, std::size_t cap) {
  std::map<std::string, std::size_t> counts;
  for (const auto& toks : corpus)
    for (const auto& t : toks) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (const auto& [w, c] : items) {
    if (v.size() >= cap) break;
    if (c >= min_count) v.push(w);
  }
  return v;
}

Vocab Vocab::from_words(const std::vector<std::string>& words) {
  Vocab v;
  for (const auto& w : words) v.push(w);
  return v;
}

int Vocab::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

std::uint64_t Vocab::fingerprint() const {
  std::uint64_t h = fnv1a("vocab");
  for (const auto& w : words_) h = fnv1a(w + '\n', h);
  return h;
}

std::uint64_t fnv1a(const std::string& data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace rulesp
