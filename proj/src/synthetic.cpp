#include "rulesp/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <set>

#include "rulesp/errors.hpp"
#include "rulesp/executor.hpp"

namespace rulesp {
namespace {

using Rng = std::mt19937_64;

template <class T>
const T& pick(const std::vector<T>& xs, Rng& rng) {
  return xs[std::uniform_int_distribution<std::size_t>(0, xs.size() - 1)(rng)];
}

bool coin(double p, Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

int uniform_int(int lo, int hi, Rng& rng) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

const std::vector<std::string> kNations = {"france", "germany", "brazil", "spain",  "italy", "japan",
                                           "kenya",  "norway",  "chile",  "egypt",  "canada", "mexico",
                                           "peru",   "sweden",  "poland", "greece", "ghana",  "austria"};
const std::vector<std::string> kFirst = {"alan",  "bruno", "carlos", "dmitri", "erik",   "felix", "gustav",
                                         "hugo",  "ivan",  "jonas",  "karl",   "luca",   "marco", "niko",
                                         "oscar", "pablo", "rafael", "stefan", "tomas",  "viktor"};
const std::vector<std::string> kLast = {"abbott", "becker", "costa",  "dalton",   "evans", "ferreira", "gomez",
                                        "horvat", "ivanov", "jansen", "kowalski", "larsen", "moreau",  "novak",
                                        "olsen",  "petrov", "quinn",  "rossi",    "silva", "torres"};
const std::vector<std::string> kTeams = {"falcons", "tigers",  "wolves",  "sharks", "eagles", "bears",
                                         "lions",   "hornets", "rams",    "jets",   "comets", "pirates",
                                         "raiders", "titans",  "stallions", "vipers"};
const std::vector<std::string> kCities = {"lyon",  "munich", "porto", "osaka", "denver", "leeds", "turin", "bergen",
                                          "quito", "cairo",  "dakar", "hanoi", "perth",  "tampa", "graz",  "varna"};
const std::vector<std::string> kPositions = {"goalkeeper", "striker", "defender", "midfielder",
                                             "winger",     "sweeper", "playmaker", "fullback"};
const std::vector<std::string> kTrees = {"oak", "pine", "maple", "cedar", "birch", "elm", "aspen", "willow"};
const std::vector<std::string> kGrounds = {"park", "arena", "field", "dome"};
const std::vector<std::string> kCoachFirst = {"anders", "boris", "cyril", "dario", "emil", "fabio", "gunnar", "henrik"};
const std::vector<std::string> kCoachLast = {"wagner", "young", "zimmer", "ward", "vance", "unger", "stone", "reyes"};
const std::vector<std::string> kSchools = {"northfield", "eastbrook", "westlake",  "southgate",
                                           "ridgemont",  "lakeview",  "hillcrest", "riverside"};

std::string number_cell(const std::string& kind, Rng& rng) {
  if (kind == "rank") return std::to_string(uniform_int(1, 25, rng));
  if (kind == "wins") return std::to_string(uniform_int(26, 60, rng));
  if (kind == "losses") return std::to_string(uniform_int(61, 99, rng));
  if (kind == "points") return std::to_string(uniform_int(100, 999, rng));
  if (kind == "year") return std::to_string(uniform_int(1950, 2020, rng));
  if (kind == "attendance") return std::to_string(uniform_int(2100, 9999, rng));
  if (kind == "height") {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", uniform_int(150, 220, rng) / 100.0);
    return buf;
  }
  return std::to_string(uniform_int(10000, 99999, rng));
}

std::string text_cell(const std::string& kind, Rng& rng) {
  if (kind == "nation") return pick(kNations, rng);
  if (kind == "player") return pick(kFirst, rng) + " " + pick(kLast, rng);
  if (kind == "team") return pick(kTeams, rng);
  if (kind == "city") return pick(kCities, rng);
  if (kind == "position") return pick(kPositions, rng);
  if (kind == "venue") return pick(kTrees, rng) + " " + pick(kGrounds, rng);
  if (kind == "coach") return pick(kCoachFirst, rng) + " " + pick(kCoachLast, rng);
  return pick(kSchools, rng) + " college";
}

Table make_table(const std::string& id, const SyntheticSpec& spec, Rng& rng) {
  const auto& concepts = synthetic_concepts();
  std::vector<std::size_t> text, number;
  for (std::size_t i = 0; i < concepts.size(); ++i)
    (concepts[i].type == ColumnType::Text ? text : number).push_back(i);
  std::shuffle(text.begin(), text.end(), rng);
  std::shuffle(number.begin(), number.end(), rng);
  const auto ncols = static_cast<std::size_t>(uniform_int(static_cast<int>(spec.min_cols), static_cast<int>(spec.max_cols), rng));
  std::vector<std::size_t> chosen = {text[0], text[1], number[0], number[1]};
  std::vector<std::size_t> rest(text.begin() + 2, text.end());
  rest.insert(rest.end(), number.begin() + 2, number.end());
  std::shuffle(rest.begin(), rest.end(), rng);
  for (std::size_t i = 0; chosen.size() < ncols; ++i) chosen.push_back(rest[i]);
  std::shuffle(chosen.begin(), chosen.end(), rng);

  std::vector<std::string> header;
  std::vector<ColumnType> types;
  for (auto c : chosen) {
    std::string h = concepts[c].name;
    h[0] = static_cast<char>(h[0] - 'a' + 'A');
    header.push_back(h);
    types.push_back(concepts[c].type);
  }
  const auto nrows = static_cast<std::size_t>(uniform_int(static_cast<int>(spec.min_rows), static_cast<int>(spec.max_rows), rng));
  std::vector<std::vector<std::string>> rows(nrows, std::vector<std::string>(chosen.size()));
  for (std::size_t j = 0; j < chosen.size(); ++j) {
    const auto& kind = concepts[chosen[j]];
    // Names and seasons identify a row; the other columns may repeat values.
    const bool unique = kind.name == "player" || kind.name == "year" || kind.name == "points";
    std::set<std::string> seen;
    for (std::size_t r = 0; r < nrows; ++r) {
      std::string v;
      for (int tries = 0; tries < 100; ++tries) {
        v = kind.type == ColumnType::Number ? number_cell(kind.name, rng) : text_cell(kind.name, rng);
        if (!unique || !seen.count(v)) break;
      }
      seen.insert(v);
      rows[r][j] = v;
    }
  }
  return Table(id, header, types, rows);
}

std::optional<SQLQuery> draw_gold(const Table& t, Rng& rng) {
  SQLQuery q;
  const std::size_t ncol = t.num_columns();
  q.sel_col = std::uniform_int_distribution<std::size_t>(0, ncol - 1)(rng);
  if (!coin(0.6, rng)) {
    std::vector<Agg> options = {Agg::Count};
    if (t.is_numeric(q.sel_col)) options = {Agg::Max, Agg::Min, Agg::Count, Agg::Sum, Agg::Avg};
    q.agg = pick(options, rng);
  }
  std::vector<std::size_t> others;
  for (std::size_t j = 0; j < ncol; ++j)
    if (j != q.sel_col) others.push_back(j);
  std::shuffle(others.begin(), others.end(), rng);
  const std::size_t n_conds = coin(0.7, rng) ? 1 : 2;
  const std::size_t row = std::uniform_int_distribution<std::size_t>(0, t.num_rows() - 1)(rng);
  for (std::size_t c = 0; c < n_conds; ++c) {
    Condition cond{others[c], Op::Eq, t.cell(row, others[c])};
    if (t.is_numeric(cond.col) && coin(0.4, rng)) cond.op = coin(0.5, rng) ? Op::Gt : Op::Lt;
    q.conds.push_back(cond);
  }
  try {
    auto ans = execute(q, t);
    if (ans.kind == Answer::Kind::CellSet && ans.cells->empty()) return std::nullopt;
  } catch (const Error&) {
    return std::nullopt;
  }
  return q;
}

struct Phrasing {
  bool literal;
  bool trap;
  bool literal_agg;
};

std::string column_word(const Table& t, std::size_t col, bool paraphrase) {
  const std::string& name = t.column_name(col);
  if (!paraphrase) return name;
  for (const auto& c : synthetic_concepts())
    if (c.name == name) return c.paraphrase;
  return name;
}

std::string render_select(const SQLQuery& q, const Table& t, const Phrasing& ph, Rng& rng) {
  const std::string s = column_word(t, q.sel_col, !ph.literal);
  if (ph.trap) return "how many " + s;
  if (ph.literal || ph.literal_agg) {
    switch (q.agg) {
      case Agg::None: return pick<std::string>({"what is the ", "which ", "name the ", "tell me the "}, rng) + s;
      case Agg::Count: return pick<std::string>({"how many ", "what is the total number of "}, rng) + s;
      case Agg::Max: return pick<std::string>({"what is the maximum ", "maximum "}, rng) + s;
      case Agg::Min: return pick<std::string>({"what is the minimum ", "minimum "}, rng) + s;
      case Agg::Sum: return pick<std::string>({"what is the sum of ", "sum of "}, rng) + s;
      case Agg::Avg: return pick<std::string>({"what is the average ", "average "}, rng) + s;
    }
  }
  switch (q.agg) {
    case Agg::None: return pick<std::string>({"which ", "give the ", "list the ", "show the "}, rng) + s;
    case Agg::Count: return pick<std::string>({"count the ", "number of "}, rng) + s;
    case Agg::Max: return pick<std::string>({"top ", "highest ", "biggest "}, rng) + s;
    case Agg::Min: return pick<std::string>({"lowest ", "smallest "}, rng) + s;
    case Agg::Sum: return pick<std::string>({"combined ", "overall "}, rng) + s;
    case Agg::Avg: return pick<std::string>({"mean ", "typical "}, rng) + s;
  }
  return s;
}

std::string render_condition(const Condition& c, const Table& t, const Phrasing& ph, const SyntheticSpec& spec,
                             Rng& rng) {
  const bool paraphrase = !ph.literal && coin(spec.where_paraphrase_rate, rng);
  const std::string w = column_word(t, c.col, paraphrase);
  const std::string& v = c.value;
  if (c.op == Op::Eq) {
    if (coin(spec.bare_value_rate, rng)) return "for " + v;
    if (ph.literal) return pick<std::string>({"when " + w + " is " + v, "where the " + w + " is " + v, "with " + w + " " + v}, rng);
    return pick<std::string>({"whose " + w + " is " + v, "with a " + w + " of " + v, "having " + w + " " + v}, rng);
  }
  const bool year = t.column_name(c.col) == "year";
  if (ph.literal) {
    if (c.op == Op::Gt) {
      if (year && coin(0.5, rng)) return "after " + v;
      return pick<std::string>({"when " + w + " is more than " + v, "with " + w + " greater than " + v,
                                "where " + w + " is higher than " + v}, rng);
    }
    if (year && coin(0.5, rng)) return "before " + v;
    return pick<std::string>({"when " + w + " is less than " + v, "with " + w + " lower than " + v,
                              "where " + w + " is fewer than " + v}, rng);
  }
  if (c.op == Op::Gt) return pick<std::string>({"with " + w + " above " + v, "whose " + w + " exceeds " + v, "with " + w + " over " + v}, rng);
  return pick<std::string>({"with " + w + " below " + v, "whose " + w + " is under " + v}, rng);
}

Dataset make_split(const std::string& prefix, const SplitSize& size, const SyntheticSpec& spec, Rng& rng) {
  Dataset d;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < size.tables; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%03zu", prefix.c_str(), i);
    ids.push_back(buf);
    d.tables.emplace(buf, make_table(buf, spec, rng));
  }
  for (std::size_t n = 0; n < size.questions; ++n) {
    const Table& t = d.tables.at(ids[n % ids.size()]);
    std::optional<SQLQuery> gold;
    while (!gold) gold = draw_gold(t, rng);
    Phrasing ph{coin(spec.coverage_knob, rng), false, false};
    if (!ph.literal) ph.literal_agg = coin(spec.literal_agg_rate, rng);
    if (ph.literal && t.is_numeric(gold->sel_col) && coin(spec.trap_rate, rng)) {
      gold->agg = Agg::None;
      ph.trap = true;
    }
    std::string text = render_select(*gold, t, ph, rng);
    for (std::size_t i = 0; i < gold->conds.size(); ++i)
      text += (i == 0 ? " " : " and ") + render_condition(gold->conds[i], t, ph, spec, rng);
    text += " ?";
    d.examples.push_back(Example{tokenize(text), t.id(), std::nullopt, Provenance::Gold, false});
    d.evaluation_gold.push_back(*gold);
  }
  return d;
}

}  // namespace

const std::vector<ColumnConcept>& synthetic_concepts() {
  static const std::vector<ColumnConcept> concepts = {
      {"nation", "country", ColumnType::Text},      {"player", "athlete", ColumnType::Text},
      {"team", "squad", ColumnType::Text},          {"city", "town", ColumnType::Text},
      {"position", "role", ColumnType::Text},       {"venue", "stadium", ColumnType::Text},
      {"coach", "manager", ColumnType::Text},       {"school", "academy", ColumnType::Text},
      {"rank", "placing", ColumnType::Number},      {"wins", "victories", ColumnType::Number},
      {"losses", "defeats", ColumnType::Number},    {"points", "score", ColumnType::Number},
      {"year", "season", ColumnType::Number},       {"attendance", "crowd", ColumnType::Number},
      {"height", "stature", ColumnType::Number},    {"salary", "wage", ColumnType::Number},
  };
  return concepts;
}

void SyntheticSpec::validate() const {
  auto prob = [](double p) { return p >= 0 && p <= 1; };
  if (!prob(coverage_knob) || !prob(trap_rate) || !prob(where_paraphrase_rate) || !prob(bare_value_rate) ||
      !prob(literal_agg_rate))
    throw ConfigError("synthetic corpus rates must lie in [0, 1]");
  if (train.tables == 0 || dev.tables == 0 || test.tables == 0) throw ConfigError("every split needs a table");
  if (min_rows == 0 || min_rows > max_rows) throw ConfigError("bad row range");
  if (min_cols < 4 || min_cols > max_cols || max_cols > synthetic_concepts().size())
    throw ConfigError("column range must lie within [4, 16]");
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticCorpus c;
  Rng train_rng(spec.seed), dev_rng(spec.seed + 1000003), test_rng(spec.seed + 2000006);
  c.train = make_split("train", spec.train, spec, train_rng);
  c.dev = make_split("dev", spec.dev, spec, dev_rng);
  c.test = make_split("test", spec.test, spec, test_rng);
  return c;
}

}  // namespace rulesp
