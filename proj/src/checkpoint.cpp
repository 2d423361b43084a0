#include "rulesp/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "rulesp/errors.hpp"

namespace rulesp {
namespace {

constexpr char kMagic[8] = {'R', 'S', 'P', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}
  template <class T>
  void pod(T v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void params(const ParameterSet& p) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(p.num_blocks()));
    for (std::size_t b = 0; b < p.num_blocks(); ++b) {
      str(p.name(b));
      pod<std::int64_t>(p[b].rows());
      pod<std::int64_t>(p[b].cols());
      os_.write(reinterpret_cast<const char*>(p[b].data()), static_cast<std::streamsize>(sizeof(double) * p[b].size()));
    }
  }
  void examples(const std::vector<Example>& xs) {
    pod<std::uint64_t>(xs.size());
    for (const auto& ex : xs) {
      pod<std::uint64_t>(ex.question.size());
      for (const auto& t : ex.question) str(t);
      str(ex.table_id);
      pod<std::uint8_t>(ex.lf ? 1 : 0);
      if (ex.lf) {
        pod<std::uint8_t>(static_cast<std::uint8_t>(ex.lf->agg));
        pod<std::uint64_t>(ex.lf->sel_col);
        pod<std::uint64_t>(ex.lf->conds.size());
        for (const auto& c : ex.lf->conds) {
          pod<std::uint64_t>(c.col);
          pod<std::uint8_t>(static_cast<std::uint8_t>(c.op));
          str(c.value);
        }
      }
      pod<std::uint8_t>(static_cast<std::uint8_t>(ex.provenance));
      pod<std::uint8_t>(ex.covered ? 1 : 0);
    }
  }

 private:
  std::ostream& os_;
};

template <class F>
auto checked(F f, int v) -> decltype(f(v)) {
  try {
    return f(v);
  } catch (const InvalidQuery& e) {
    throw IncompatibleCheckpoint(e.what());
  }
}

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}
  template <class T>
  T pod() {
    T v{};
    is_.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is_) throw IncompatibleCheckpoint("checkpoint is truncated");
    return v;
  }
  std::string str() {
    auto n = pod<std::uint64_t>();
    if (n > (1ULL << 32)) throw IncompatibleCheckpoint("implausible string length in checkpoint");
    std::string s(n, '\0');
    is_.read(s.data(), static_cast<std::streamsize>(n));
    if (!is_) throw IncompatibleCheckpoint("checkpoint is truncated");
    return s;
  }
  ParameterSet params() {
    ParameterSet p;
    auto n = pod<std::uint32_t>();
    for (std::uint32_t b = 0; b < n; ++b) {
      std::string name = str();
      auto rows = pod<std::int64_t>();
      auto cols = pod<std::int64_t>();
      if (rows < 0 || cols < 0 || rows * cols > (1LL << 31)) throw IncompatibleCheckpoint("bad block shape");
      auto k = p.add(name, rows, cols);
      is_.read(reinterpret_cast<char*>(p[k].data()), static_cast<std::streamsize>(sizeof(double) * p[k].size()));
      if (!is_) throw IncompatibleCheckpoint("checkpoint is truncated");
    }
    return p;
  }
  std::vector<Example> examples() {
    std::vector<Example> xs(pod<std::uint64_t>());
    for (auto& ex : xs) {
      ex.question.resize(pod<std::uint64_t>());
      for (auto& t : ex.question) t = str();
      ex.table_id = str();
      if (pod<std::uint8_t>()) {
        SQLQuery q;
        q.agg = checked(agg_from_int, pod<std::uint8_t>());
        q.sel_col = pod<std::uint64_t>();
        q.conds.resize(pod<std::uint64_t>());
        for (auto& c : q.conds) {
          c.col = pod<std::uint64_t>();
          c.op = checked(op_from_int, pod<std::uint8_t>());
          c.value = str();
        }
        ex.lf = std::move(q);
      }
      auto prov = pod<std::uint8_t>();
      if (prov > static_cast<std::uint8_t>(Provenance::QGen)) throw IncompatibleCheckpoint("bad provenance");
      ex.provenance = static_cast<Provenance>(prov);
      ex.covered = pod<std::uint8_t>() != 0;
    }
    return xs;
  }

 private:
  std::istream& is_;
};

}  // namespace

std::uint64_t model_fingerprint(const Parser& parser, const Generator& generator) {
  return parser.fingerprint() * 1099511628211ULL ^ generator.fingerprint();
}

void save_checkpoint(const std::filesystem::path& path, const TrainerState& state, std::uint64_t fingerprint) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  os.write(kMagic, sizeof kMagic);
  Writer w(os);
  w.pod(kCheckpointVersion);
  w.pod(fingerprint);
  w.params(state.theta);
  w.params(state.theta_covered);
  w.params(state.theta_uncovered);
  w.params(state.gen);
  w.str(state.pt.serialize());
  w.examples(state.d0);
  w.examples(state.pool_self);
  w.examples(state.pool_qgen);
  w.pod<std::uint64_t>(state.epoch);
  if (!os) throw ConfigError("failed writing " + path.string());
}

TrainerState load_checkpoint(const std::filesystem::path& path, std::uint64_t fingerprint) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path.string());
  char magic[sizeof kMagic];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw IncompatibleCheckpoint("not a checkpoint file");
  Reader r(is);
  auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw IncompatibleCheckpoint("checkpoint format version " + std::to_string(version) + ", expected " +
                                 std::to_string(kCheckpointVersion));
  if (r.pod<std::uint64_t>() != fingerprint)
    throw IncompatibleCheckpoint("checkpoint was written for a different model configuration");
  TrainerState s;
  s.theta = r.params();
  s.theta_covered = r.params();
  s.theta_uncovered = r.params();
  s.gen = r.params();
  try {
    s.pt = PhraseTable::deserialize(r.str());
  } catch (const ParseError& e) {
    throw IncompatibleCheckpoint(std::string("phrase table: ") + e.what());
  }
  s.d0 = r.examples();
  s.pool_self = r.examples();
  s.pool_qgen = r.examples();
  s.epoch = r.pod<std::uint64_t>();
  if (is.peek() != std::char_traits<char>::eof()) throw IncompatibleCheckpoint("trailing bytes after checkpoint");
  return s;
}

}  // namespace rulesp
