#include "rulesp/dataset.hpp"

#include <fstream>
#include <json.hpp>

#include "rulesp/errors.hpp"

namespace rulesp {

using nlohmann::json;

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::Gold: return "gold";
    case Provenance::Rule: return "rule";
    case Provenance::Self: return "self";
    case Provenance::QGen: return "qgen";
  }
  return "gold";
}

const Table& Dataset::table_of(const Example& ex) const {
  auto it = tables.find(ex.table_id);
  if (it == tables.end()) throw DanglingReference("unknown table id '" + ex.table_id + "'");
  return it->second;
}

namespace {

// WikiSQL stores numeric cells and some values as JSON numbers.
std::string scalar_to_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return v.dump();
  throw Error("expected string or number, got " + std::string(v.type_name()));
}

Table parse_table(const json& rec) {
  std::vector<std::string> header = rec.at("header").get<std::vector<std::string>>();
  std::vector<ColumnType> types;
  for (const auto& t : rec.at("types")) types.push_back(column_type_from_string(t.get<std::string>()));
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : rec.at("rows")) {
    std::vector<std::string> row;
    for (const auto& c : r) row.push_back(scalar_to_string(c));
    rows.push_back(std::move(row));
  }
  return Table(rec.at("id").get<std::string>(), std::move(header), std::move(types), std::move(rows));
}

SQLQuery parse_sql(const json& sql) {
  SQLQuery q;
  q.sel_col = sql.at("sel").get<std::size_t>();
  q.agg = agg_from_int(sql.at("agg").get<int>());
  for (const auto& c : sql.at("conds")) {
    if (!c.is_array() || c.size() != 3) throw Error("condition must be [col, op, value]");
    q.conds.push_back({c[0].get<std::size_t>(), op_from_int(c[1].get<int>()), scalar_to_string(c[2])});
  }
  return q;
}

template <class F>
void for_each_line(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    f(n, line);
  }
}

}  // namespace

TableMap load_tables(const std::filesystem::path& tables_path, const LoadOptions& options, LoadReport* report) {
  TableMap tables;
  for_each_line(tables_path, [&](std::size_t n, const std::string& line) {
    try {
      Table t = parse_table(json::parse(line));
      std::string id = t.id();
      if (!tables.emplace(id, std::move(t)).second) throw Error("duplicate table id '" + id + "'");
    } catch (const std::exception& e) {
      ParseError err(n, std::string(tables_path.filename().string()) + ": " + e.what());
      if (options.strict) throw err;
      if (report) report->errors.emplace_back(err.what());
    }
  });
  return tables;
}

Dataset load_dataset(const std::filesystem::path& questions_path, const std::filesystem::path& tables_path,
                     const LoadOptions& options, LoadReport* report) {
  Dataset ds;
  ds.tables = load_tables(tables_path, options, report);
  for_each_line(questions_path, [&](std::size_t n, const std::string& line) {
    if (report) ++report->lines;
    Example ex;
    std::optional<SQLQuery> gold;
    try {
      json rec = json::parse(line);
      ex.question = tokenize_question(rec.at("question").get<std::string>());
      ex.table_id = rec.at("table_id").get<std::string>();
      if (rec.contains("sql") && !rec["sql"].is_null()) gold = parse_sql(rec["sql"]);
    } catch (const std::exception& e) {
      ParseError err(n, questions_path.filename().string() + ": " + e.what());
      if (options.strict) throw err;
      if (report) report->errors.emplace_back(err.what());
      return;
    }
    auto it = ds.tables.find(ex.table_id);
    if (it == ds.tables.end()) {
      DanglingReference err("line " + std::to_string(n) + ": table id '" + ex.table_id + "' not found");
      if (options.strict) throw err;
      if (report) report->errors.emplace_back(err.what());
      return;
    }
    if (gold && !is_valid(*gold, it->second)) {
      if (report) report->warnings.push_back("line " + std::to_string(n) + ": gold query invalid for its table; dropped");
      gold.reset();
    }
    ds.examples.push_back(std::move(ex));
    if (options.keep_evaluation_gold) ds.evaluation_gold.push_back(std::move(gold));
  });
  return ds;
}

void write_tables(const std::filesystem::path& path, const TableMap& tables) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  for (const auto& [id, t] : tables) {
    json types = json::array();
    for (auto ty : t.column_types()) types.push_back(to_string(ty));
    json rec = {{"id", id}, {"header", t.header()}, {"types", types}, {"rows", t.rows()}};
    out << rec.dump() << '\n';
  }
}

void write_questions(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
    const auto& ex = dataset.examples[i];
    json rec = {{"question", join(ex.question)}, {"table_id", ex.table_id}};
    if (dataset.has_evaluation_gold() && dataset.evaluation_gold[i]) {
      const auto& q = *dataset.evaluation_gold[i];
      json conds = json::array();
      for (const auto& c : q.conds) conds.push_back({c.col, static_cast<int>(c.op), c.value});
      rec["sql"] = {{"sel", q.sel_col}, {"agg", static_cast<int>(q.agg)}, {"conds", conds}};
    }
    out << rec.dump() << '\n';
  }
}

}  // namespace rulesp
