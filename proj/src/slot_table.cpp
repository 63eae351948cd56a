#include "mslu/slot_table.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "mslu/errors.hpp"

namespace mslu {

std::size_t SlotFillingTable::filled() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.has_value();
  return n;
}

SlotValues SlotFillingTable::values(const LabelSet& labels) const {
  if (labels.size() != rows.size())
    throw DimensionError("table has " + std::to_string(rows.size()) + " rows for " + std::to_string(labels.size()) +
                         " labels");
  SlotValues out;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i]) out[labels.label(i)] = rows[i]->value;
  return out;
}

SlotFillingTable update_table(const SlotFillingTable& prev, const Tensor& masked,
                              const std::vector<std::optional<std::string>>& provenance, std::size_t round) {
  if (masked.rank() != 2 || masked.rows() != prev.rows.size() || provenance.size() != prev.rows.size())
    throw DimensionError("table update: " + std::to_string(prev.rows.size()) + " rows, masked matrix " +
                         shape_string(masked.shape()) + ", " + std::to_string(provenance.size()) +
                         " provenance entries");
  SlotFillingTable next = prev;
  for (std::size_t i = 0; i < prev.rows.size(); ++i) {
    const auto row = masked.row(i);
    bool nonzero = false;
    for (double x : row) nonzero = nonzero || x != 0.0;
    if (!nonzero) continue;
    if (!provenance[i]) throw IntegrityError("masked row " + std::to_string(i) + " is non-zero but has no value");
    next.rows[i] = TableEntry{*provenance[i], round, Tensor(Shape{row.size()}, std::vector<double>(row.begin(), row.end()))};
  }
  return next;
}

// ---------------------------------------------------------------- templates

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fill_holes(const std::string& text, const SlotValues& values) {
  std::string out;
  for (std::size_t i = 0; i < text.size();) {
    if (text[i] == '{') {
      const auto close = text.find('}', i);
      const std::string label = text.substr(i + 1, close - i - 1);
      out += values.at(label);
      i = close + 1;
    } else {
      out += text[i++];
    }
  }
  return out;
}

const char* kBuiltinTemplates = R"(mslu-templates 1
# Slot combinations -> query skeletons.
skeleton fromloc,toloc = flights from {fromloc} to {toloc}
skeleton fromloc = flights from {fromloc}
skeleton toloc = flights to {toloc}
prefix flight_type = {flight_type}
clause airline = on {airline}
clause depart_date = leaving on {depart_date}
clause depart_time = in the {depart_time}
clause return_date = returning on {return_date}
)";

}  // namespace

TemplateSet TemplateSet::parse(std::istream& in) {
  TemplateSet set;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const std::string where = "templates line " + std::to_string(line_no) + ": ";
    if (!header) {
      if (line != "mslu-templates 1") throw FormatError(where + "expected header 'mslu-templates 1'");
      header = true;
      continue;
    }
    const auto eq = line.find('=');
    const auto space = line.find(' ');
    if (eq == std::string::npos || space == std::string::npos || space > eq)
      throw FormatError(where + "expected '<kind> <labels> = <text>'");
    const std::string kind = line.substr(0, space);
    const std::string labels = trim(line.substr(space + 1, eq - space - 1));
    const std::string text = trim(line.substr(eq + 1));
    if (labels.empty() || text.empty()) throw FormatError(where + "empty labels or text");
    std::vector<std::string> label_list;
    std::stringstream ls(labels);
    for (std::string l; std::getline(ls, l, ',');)
      if (!trim(l).empty()) label_list.push_back(trim(l));
    // Every hole must name a label of the line.
    for (std::size_t i = text.find('{'); i != std::string::npos; i = text.find('{', i + 1)) {
      const auto close = text.find('}', i);
      if (close == std::string::npos) throw FormatError(where + "unclosed '{'");
      const std::string hole = text.substr(i + 1, close - i - 1);
      if (std::find(label_list.begin(), label_list.end(), hole) == label_list.end())
        throw FormatError(where + "hole {" + hole + "} is not among the line's labels");
    }
    if (kind == "skeleton") {
      set.skeletons_.push_back({label_list, text});
    } else if (kind == "prefix" || kind == "clause") {
      if (label_list.size() != 1) throw FormatError(where + kind + " takes exactly one label");
      (kind == "prefix" ? set.prefixes_ : set.clauses_).push_back({label_list[0], text});
    } else {
      throw FormatError(where + "unknown line kind '" + kind + "'");
    }
  }
  if (!header) throw FormatError("templates: missing header");
  return set;
}

TemplateSet TemplateSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open template file " + path.string());
  return parse(in);
}

TemplateSet TemplateSet::builtin() {
  std::istringstream in(kBuiltinTemplates);
  return parse(in);
}

FlightQuery TemplateSet::render(const SlotValues& values) const {
  FlightQuery q;
  q.fields = values;
  const Skeleton* best = nullptr;
  for (const auto& s : skeletons_) {
    bool ok = true;
    for (const auto& l : s.labels) ok = ok && values.count(l);
    if (ok && (!best || s.labels.size() > best->labels.size())) best = &s;
  }
  if (!best) return q;
  q.complete = true;
  std::vector<std::string> parts;
  for (const auto& p : prefixes_)
    if (values.count(p.label)) parts.push_back(fill_holes(p.text, values));
  parts.push_back(fill_holes(best->text, values));
  for (const auto& c : clauses_)
    if (values.count(c.label)) parts.push_back(fill_holes(c.text, values));
  q.text = join_tokens(parts);
  return q;
}

FlightQuery render_query(const SlotFillingTable& table, const LabelSet& labels, const TemplateSet& templates) {
  return templates.render(table.values(labels));
}

// ---------------------------------------------------------------- flights

MockFlightBackend MockFlightBackend::parse(std::istream& in) {
  std::vector<Flight> flights;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, '|');) cols.push_back(trim(c));
    if (cols.size() != 7) throw FormatError("flight db line " + std::to_string(line_no) + ": expected 7 fields");
    auto opt = [](const std::string& s) { return s == "-" ? std::string() : s; };
    Flight f{cols[0], cols[1], cols[2], opt(cols[3]), opt(cols[4]), cols[5], 0.0};
    try {
      std::size_t used = 0;
      f.fare = std::stod(cols[6], &used);
      if (used != cols[6].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw FormatError("flight db line " + std::to_string(line_no) + ": bad fare '" + cols[6] + "'");
    }
    flights.push_back(std::move(f));
  }
  return MockFlightBackend(std::move(flights));
}

MockFlightBackend MockFlightBackend::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TransportError("flight database unavailable: " + path.string());
  return parse(in);
}

namespace {

// Table label -> flight field. Dotted ATIS labels are matched on their stem.
const std::string* flight_field(const Flight& f, const std::string& label) {
  static const std::map<std::string, std::string Flight::*> fields{
      {"fromloc", &Flight::from},          {"toloc", &Flight::to},
      {"depart_date", &Flight::depart_date}, {"return_date", &Flight::return_date},
      {"airline", &Flight::airline},       {"airline_name", &Flight::airline},
      {"flight_type", &Flight::type},      {"round_trip", &Flight::type}};
  const std::string stem = label.substr(0, label.find('.'));
  auto it = fields.find(stem);
  return it == fields.end() ? nullptr : &(f.*(it->second));
}

}  // namespace

std::vector<Flight> MockFlightBackend::search(const SlotValues& fields) const {
  std::vector<Flight> out;
  for (const auto& f : flights_) {
    bool ok = true;
    for (const auto& [label, value] : fields) {
      const std::string* field = flight_field(f, label);
      if (field && *field != value) ok = false;
    }
    if (ok) out.push_back(f);
  }
  return out;
}

FlightResult flight_search(const FlightQuery& query, const FlightBackend& backend) {
  FlightResult r;
  if (!query.complete) {
    r.status = SearchStatus::InsufficientSlots;
    return r;
  }
  r.flights = backend.search(query.fields);
  return r;
}

}  // namespace mslu
